"""Generative light-field synthesis from the center view and a depth map.

Each center pixel ``p = (y_c, x_c)`` with slope ``m(p)`` lands in view
``(s, t)`` at ``(y_c + m d_s, x_c + m d_t)`` where ``d_s, d_t`` are the
angular offsets from the center view.  Its color is splatted onto the (up
to) 2x2 target pixels it overlaps, weighted by a separable hat kernel.  The
synthesized sample is the raw weighted sum; nothing is normalized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _parallel
from .errors import DimensionMismatch
from .lightfield import DepthMap, LightField, SubApertureImage, center_index


@dataclass(frozen=True)
class TriangularKernel:
    """Hat function with C1-smoothed kinks.

    Within ``eps`` of each kink the hat is replaced by a polynomial blend
    that keeps the hat's values at the integers (1 at 0, 0 at +-1) and its
    support ``(-1, 1)``.  ``eps=0`` gives the exact hat.
    """
    eps: float = 1e-3

    def __post_init__(self):
        if not (0.0 <= self.eps < 0.5):
            raise ValueError("kernel eps must be in [0, 0.5)")

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        shape = x.shape
        a = np.abs(x).reshape(-1)
        e = self.eps
        out = np.maximum(1.0 - a, 0.0)
        if e > 0:
            peak = a < e
            if peak.any():
                ap = a[peak]
                out[peak] = 1.0 - 1.5 * ap**2 / e + 0.5 * ap**4 / e**3
            foot = (a >= 1.0 - e) & (a < 1.0)
            if foot.any():
                u = a[foot] - 1.0
                out[foot] = u * u * (2.0 * e + u) / e**2
        return out.reshape(shape)

    def deriv(self, x):
        x = np.asarray(x, dtype=np.float64)
        shape = x.shape
        x = x.reshape(-1)
        a = np.abs(x)
        e = self.eps
        # d/da of the profile, then multiply by sign(x)
        da = np.where(a < 1.0, -1.0, 0.0)
        if e > 0:
            peak = a < e
            if peak.any():
                ap = a[peak]
                da[peak] = -3.0 * ap / e + 2.0 * ap**3 / e**3
            foot = (a >= 1.0 - e) & (a < 1.0)
            if foot.any():
                u = a[foot] - 1.0
                da[foot] = 4.0 * u / e + 3.0 * u * u / e**2
            return (np.sign(x) * da).reshape(shape)
        # exact hat: the [0, 1) branch owns x = 0
        return np.where(x < 0, -da, da).reshape(shape)


def triangular(x, kernel=TriangularKernel()):
    return kernel.value(x)


def triangular_deriv(x, kernel=TriangularKernel()):
    return kernel.deriv(x)


def view_offsets(S, T):
    """Angular offsets ``(d_s, d_t)`` of every view, in row-major view order."""
    sc, tc = center_index(S), center_index(T)
    return [(s, t, s - sc, t - tc) for s in range(S) for t in range(T)]


def _as_image(center):
    pix = center.pixels if isinstance(center, SubApertureImage) else np.asarray(center, dtype=np.float64)
    if pix.ndim == 2:
        pix = pix[..., None]
    return pix


def _as_depth(m):
    if isinstance(m, DepthMap):
        if not m.fully_defined:
            raise ValueError("depth map must be fully defined for rendering")
        return m.values
    return np.asarray(m, dtype=np.float64)


class _Footprint:
    """Target pixels and kernel weights for one view."""

    def __init__(self, m, ds, dt, kernel, with_deriv=False):
        Y, X = m.shape
        yy, xx = np.indices((Y, X), dtype=np.float64)
        ty = yy + m * ds
        tx = xx + m * dt
        y0 = np.floor(ty)
        x0 = np.floor(tx)
        self.shape = (Y, X)
        self.taps = []
        # per-axis weights for the two neighbouring grid lines
        ys = [y0 + o for o in (0, 1)]
        xs = [x0 + o for o in (0, 1)]
        wys = [kernel.value(g - ty) for g in ys]
        wxs = [kernel.value(g - tx) for g in xs]
        if with_deriv:
            dwys = [kernel.deriv(g - ty) for g in ys]
            dwxs = [kernel.deriv(g - tx) for g in xs]
        for oy in (0, 1):
            gy, wy = ys[oy], wys[oy]
            for ox in (0, 1):
                gx, wx = xs[ox], wxs[ox]
                inb = (gy >= 0) & (gy < Y) & (gx >= 0) & (gx < X)
                idx = np.where(inb, gy * X + gx, 0).astype(np.intp)
                tap = {"inb": inb, "idx": idx, "w": np.where(inb, wx * wy, 0.0)}
                if with_deriv:
                    # d/dm of wx(gx - x_c - m dt) * wy(gy - y_c - m ds)
                    tap["dw"] = np.where(inb, -(dwxs[ox] * dt * wy + wx * dwys[oy] * ds), 0.0)
                self.taps.append(tap)

    def splat(self, values):
        """Scatter ``values`` (Y, X) through the footprint; returns (Y, X)."""
        Y, X = self.shape
        n = Y * X
        acc = np.zeros(n)
        for tap in self.taps:
            acc += np.bincount(tap["idx"].ravel(), weights=(tap["w"] * values).ravel(), minlength=n)
        return acc.reshape(Y, X)

    def mass(self):
        return self.splat(np.ones(self.shape))


def _render_view(pix, m, ds, dt, kernel):
    fp = _Footprint(m, ds, dt, kernel)
    out = np.empty(pix.shape)
    for c in range(pix.shape[2]):
        out[..., c] = fp.splat(pix[..., c])
    return out


def render_samples(center, m, dims, kernel=TriangularKernel()):
    """Synthesize the raw (S, T, Y, X, C) sample array."""
    pix = _as_image(center)
    m = _as_depth(m)
    if pix.shape[:2] != m.shape:
        raise DimensionMismatch(f"center image {pix.shape[:2]} vs depth {m.shape}")
    S, T = dims
    if S < 1 or T < 1:
        raise ValueError("angular dims must be >= 1")
    out = np.empty((S, T) + pix.shape)
    views = view_offsets(S, T)

    def work(v):
        s, t, ds, dt = v
        out[s, t] = _render_view(pix, m, ds, dt, kernel)

    _parallel.ordered_map(work, views)
    return out


def render_lightfield(center, m, dims, kernel=TriangularKernel()) -> LightField:
    """Forward model: synthesize the full light field.

    Where footprints from converging depths overlap the sum can exceed 1, so
    the result skips the [0, 1] range check.
    """
    return LightField.unchecked(render_samples(center, m, dims, kernel))


def _view_loss_grad(pix, m, obs, ds, dt, kernel, weights):
    fp = _Footprint(m, ds, dt, kernel, with_deriv=True)
    C = pix.shape[2]
    synth = np.empty(pix.shape)
    for c in range(C):
        synth[..., c] = fp.splat(pix[..., c])
    r = synth - obs
    if weights is not None:
        r = r * weights[..., None]
    loss = float(np.sum(r * r))
    if weights is not None:
        # d/dm of sum w r^2 is 2 w r dr/dm; r already carries one factor of w
        r = r * weights[..., None]
    rflat = r.reshape(-1, C)
    grad = np.zeros(m.shape)
    for tap in fp.taps:
        ri = rflat[tap["idx"]]  # (Y, X, C) residual at each tap target
        grad += 2.0 * tap["dw"] * np.sum(ri * pix, axis=2)
    return loss, grad


def evidence_mask(center, m, dims, kernel=TriangularKernel(), tolerance=0.1):
    """Per-sample 0/1 weights, shape (S, T, Y, X).

    A target sample counts only if its accumulated kernel mass is within
    ``tolerance`` of 1.  Lower mass means a disocclusion hole or the edge of
    the field of view; higher mass means footprints from different depths
    pile up.  Either way the no-occlusion model cannot explain the sample.
    """
    m = _as_depth(m)
    Y, X = m.shape
    S, T = dims
    out = np.empty((S, T, Y, X))

    def work(v):
        s, t, ds, dt = v
        mass = _Footprint(m, ds, dt, kernel).mass()
        out[s, t] = np.abs(mass - 1.0) <= tolerance

    _parallel.ordered_map(work, view_offsets(S, T))
    return out


def render_gradient(center, m, observed, kernel=TriangularKernel(), sample_weights=None):
    """Data term ``sum w (L_m - L)^2`` and its gradient w.r.t. ``m``.

    ``sample_weights`` (S, T, Y, X) defaults to 1 everywhere; it is treated
    as a constant when differentiating.
    """
    pix = _as_image(center)
    m = _as_depth(m)
    obs = observed.samples if isinstance(observed, LightField) else np.asarray(observed, dtype=np.float64)
    if obs.ndim == 4:
        obs = obs[..., None]
    if pix.shape[:2] != m.shape or obs.shape[2:] != pix.shape:
        raise DimensionMismatch(f"center {pix.shape}, depth {m.shape}, light field {obs.shape}")
    S, T = obs.shape[:2]
    if sample_weights is not None and np.shape(sample_weights) != obs.shape[:4]:
        raise DimensionMismatch(f"sample weights {np.shape(sample_weights)} vs {obs.shape[:4]}")

    def work(v):
        s, t, ds, dt = v
        w = None if sample_weights is None else sample_weights[s, t]
        return _view_loss_grad(pix, m, obs[s, t], ds, dt, kernel, w)

    parts = _parallel.ordered_map(work, view_offsets(S, T))
    loss = 0.0
    grad = np.zeros(m.shape)
    for lv, gv in parts:
        loss += lv
        grad += gv
    return loss, grad
