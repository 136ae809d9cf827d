"""Local slope estimation on EPIs with the structure tensor.

For an EPI ``f(a, u)`` (``a`` angular, ``u`` spatial) a scene point at
slope ``m`` traces the line ``u = u0 + m a``.  The gradient of such a
pattern is orthogonal to ``(m, 1)``, so the slope follows from the
orientation of the dominant eigenvector of the smoothed gradient outer
product.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateEpi, DegenerateGrid, DimensionMismatch
from .lightfield import CoherenceMap, DepthMap, Epi, LightField, center_index

LUMA = np.array([0.299, 0.587, 0.114])

# Scharr derivative: smoothing across, central difference along the axis
_SCHARR_SMOOTH = np.array([3.0, 10.0, 3.0]) / 16.0
_CENTRAL_DIFF = np.array([-0.5, 0.0, 0.5])


@dataclass(frozen=True)
class StructureTensorParams:
    sigma: float = 1.0  # outer (integration) scale
    tau: float = 0.5  # inner (pre-smoothing) scale
    m_min: float = -2.0
    m_max: float = 2.0

    def __post_init__(self):
        if self.sigma <= 0 or self.tau <= 0:
            raise ValueError("sigma and tau must be positive")
        if not self.m_min < self.m_max:
            raise ValueError("m_min must be < m_max")


@dataclass(frozen=True)
class LocalEstimate:
    depth: DepthMap
    coherence: CoherenceMap
    source: str  # "horizontal" or "vertical"


def luminance(pixels):
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.shape[-1] == 3:
        return pixels @ LUMA
    return pixels[..., 0]


def _derivative(f, axis):
    """Scharr-style derivative of the stacked EPIs ``f`` (..., a, u) along ``axis``."""
    other = -1 if axis == -2 else -2
    out = ndimage.correlate1d(f, _CENTRAL_DIFF, axis=axis, mode="nearest")
    return ndimage.correlate1d(out, _SCHARR_SMOOTH, axis=other, mode="nearest")


def _orientation(f, params, eps=1e-12):
    """Slope and coherence for every sample of stacked EPIs ``f`` (n, A, U)."""
    sig_in = (0, params.tau, params.tau)
    sig_out = (0, params.sigma, params.sigma)
    g = ndimage.gaussian_filter(f, sig_in, mode="nearest")
    fa = _derivative(g, -2)
    fu = _derivative(g, -1)
    Juu = ndimage.gaussian_filter(fu * fu, sig_out, mode="nearest")
    Jua = ndimage.gaussian_filter(fu * fa, sig_out, mode="nearest")
    Jaa = ndimage.gaussian_filter(fa * fa, sig_out, mode="nearest")

    trace = Juu + Jaa
    aniso = (Jaa - Juu) ** 2 + 4.0 * Jua**2
    degenerate = (trace < eps) | (aniso <= (eps * trace) ** 2)
    safe = np.where(degenerate, 1.0, trace)
    coherence = np.where(degenerate, 0.0, aniso / safe**2)
    # half-angle form: the gradient makes angle phi with the u axis, lines have slope -tan(phi)
    phi = 0.5 * np.arctan2(2.0 * Jua, Juu - Jaa)
    with np.errstate(over="ignore", invalid="ignore"):
        slope = -np.tan(phi)
    slope = np.where(degenerate, 0.0, slope)
    return slope, np.clip(coherence, 0.0, 1.0)


def _clamp(slope, coherence, params):
    bad = ~np.isfinite(slope) | (slope < params.m_min) | (slope > params.m_max)
    slope = np.clip(np.nan_to_num(slope, nan=0.0, posinf=params.m_max, neginf=params.m_min),
                    params.m_min, params.m_max)
    return slope, np.where(bad, 0.0, coherence)


def local_depth_epi(epi, params=StructureTensorParams()):
    """Slope and coherence along the EPI's center angular row.

    ``epi`` is an :class:`Epi` or an array (A, U) / (A, U, C).
    """
    pix = epi.pixels if isinstance(epi, Epi) else np.asarray(epi, dtype=np.float64)
    if pix.ndim == 2:
        pix = pix[..., None]
    if pix.shape[0] < 2:
        raise DegenerateEpi(f"EPI needs >= 2 angular rows, got {pix.shape[0]}")
    if pix.shape[1] < 2:
        raise DegenerateEpi(f"EPI needs >= 2 spatial columns, got {pix.shape[1]}")
    f = luminance(pix)[None]
    slope, coh = _orientation(f, params)
    row = center_index(pix.shape[0])
    return _clamp(slope[0, row], coh[0, row], params)


def local_depth_all(lf: LightField, params=StructureTensorParams()):
    """Horizontal and vertical estimates for the center view.

    Horizontal: EPIs through the center angular row (fixed ``s*``), one per
    image row.  Vertical: EPIs through the center angular column (fixed
    ``t*``), one per image column.
    """
    if lf.S < 2 or lf.T < 2:
        raise DegenerateGrid(f"need at least 2x2 views, got {lf.S}x{lf.T}")
    sc, tc = lf.center
    lum = luminance(lf.samples)  # (S, T, Y, X)

    # (Y, T, X): one horizontal EPI per image row
    h_stack = np.transpose(lum[sc], (1, 0, 2))
    h_slope, h_coh = _orientation(h_stack, params)
    h_slope, h_coh = _clamp(h_slope[:, tc, :], h_coh[:, tc, :], params)

    # (X, S, Y): one vertical EPI per image column
    v_stack = np.transpose(lum[:, tc], (2, 0, 1))
    v_slope, v_coh = _orientation(v_stack, params)
    v_slope, v_coh = _clamp(v_slope[:, sc, :].T, v_coh[:, sc, :].T, params)

    horiz = LocalEstimate(DepthMap(h_slope), CoherenceMap(h_coh), "horizontal")
    vert = LocalEstimate(DepthMap(v_slope), CoherenceMap(v_coh), "vertical")
    return horiz, vert


def fuse_estimates(horiz: LocalEstimate, vert: LocalEstimate, coh_threshold=0.8):
    """Keep coherent estimates; where both qualify take the more coherent one.

    Returns ``(m_init, C_init)``; pixels with no coherent estimate are left
    non-defined with coherence 0.
    """
    if horiz.depth.shape != vert.depth.shape or horiz.coherence.shape != vert.coherence.shape \
            or horiz.depth.shape != horiz.coherence.shape:
        raise DimensionMismatch("horizontal and vertical estimates differ in shape")
    if not 0.0 <= coh_threshold <= 1.0:
        raise ValueError("coherence threshold must be in [0, 1]")
    ch, cv = horiz.coherence.values, vert.coherence.values
    ok_h = ch >= coh_threshold
    ok_v = cv >= coh_threshold
    take_h = ok_h & (~ok_v | (ch >= cv))
    take_v = ok_v & ~take_h
    depth = np.where(take_h, horiz.depth.values, np.where(take_v, vert.depth.values, np.nan))
    coh = np.where(take_h, ch, np.where(take_v, cv, 0.0))
    defined = take_h | take_v
    return DepthMap(depth, defined), CoherenceMap(coh)
