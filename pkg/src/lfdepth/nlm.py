"""Non-local-means patch similarity weights.

For pixels ``p`` and ``q = p + d`` inside the search window the weight is

    w_pq = exp(-sum_o [ |I(p+o) - I(q+o)|^2 / var_color
                        + |(I(p) - I(p+o)) - (I(q) - I(q+o))|^2 / var_grad ])

with ``o`` ranging over the patch offsets and both terms summed over color
channels.  Patches read the image with clamp-to-edge indexing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _parallel
from .errors import DimensionMismatch, ImageTooSmall
from .lightfield import SubApertureImage

_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class NlmParams:
    search_radius: int = 5  # 11x11 search window
    patch_radius: int = 1  # 3x3 patch
    sigma_color_sq: float = 0.005
    sigma_grad_sq: float = 0.1

    def __post_init__(self):
        if self.search_radius < 1 or self.patch_radius < 0:
            raise ValueError("search_radius must be >= 1 and patch_radius >= 0")
        if self.sigma_color_sq <= 0 or self.sigma_grad_sq <= 0:
            raise ValueError("NLM variances must be positive")


def search_offsets(radius):
    """Offsets ``(dy, dx)`` of the search window, excluding ``(0, 0)``."""
    r = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    offs = np.stack([dy.ravel(), dx.ravel()], axis=1)
    return offs[np.any(offs != 0, axis=1)]


def pair_slices(dy, dx, shape):
    """Slices selecting every ``p`` and its partner ``q = p + (dy, dx)`` in-bounds."""
    Y, X = shape
    ny = max(0, Y - abs(dy))
    nx = max(0, X - abs(dx))  # empty once the offset reaches the image size
    p = (slice(max(0, -dy), max(0, -dy) + ny), slice(max(0, -dx), max(0, -dx) + nx))
    q = (slice(max(0, dy), max(0, dy) + ny), slice(max(0, dx), max(0, dx) + nx))
    return p, q


class NlmWeightGraph:
    """Weights ``w[k, y, x]`` from pixel ``(y, x)`` to ``(y, x) + offsets[k]``.

    Entries whose partner falls outside the image are 0 and flagged in
    ``valid``.
    """

    def __init__(self, offsets, weights, valid):
        self.offsets = np.asarray(offsets, dtype=np.intp)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.valid = np.asarray(valid, dtype=bool)
        self.weights.flags.writeable = False
        self.valid.flags.writeable = False

    @property
    def shape(self):
        return self.weights.shape[1:]

    def neighbors(self, y, x):
        """``[((qy, qx), w_pq), ...]`` for pixel ``(y, x)``."""
        out = []
        for k, (dy, dx) in enumerate(self.offsets):
            if self.valid[k, y, x]:
                out.append(((y + int(dy), x + int(dx)), float(self.weights[k, y, x])))
        return out

    def pairs(self):
        """Yield ``(dy, dx, p_slice, q_slice, w)`` with ``w`` restricted to valid ``p``."""
        for k, (dy, dx) in enumerate(self.offsets):
            ps, qs = pair_slices(int(dy), int(dx), self.shape)
            yield int(dy), int(dx), ps, qs, self.weights[k][ps]


def nlm_weights(img, params=NlmParams()) -> NlmWeightGraph:
    pix = img.pixels if isinstance(img, SubApertureImage) else np.asarray(img, dtype=np.float64)
    if pix.ndim == 2:
        pix = pix[..., None]
    Y, X, _ = pix.shape
    P, R = params.patch_radius, params.search_radius
    if Y < 2 * P + 1 or X < 2 * P + 1:
        raise ImageTooSmall(f"image {Y}x{X} smaller than the {2 * P + 1}x{2 * P + 1} patch")
    pad = P + R
    padded = np.pad(pix, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
    offsets = search_offsets(R)
    patch = [(oy, ox) for oy in range(-P, P + 1) for ox in range(-P, P + 1)]
    inv_c = 1.0 / params.sigma_color_sq
    inv_g = 1.0 / params.sigma_grad_sq

    weights = np.zeros((len(offsets), Y, X))
    valid = np.zeros((len(offsets), Y, X), dtype=bool)

    def work(k):
        dy, dx = offsets[k]
        # diff[u] = I(u) - I(u + d) on the image grown by the patch radius
        hy, hx = Y + 2 * P, X + 2 * P
        a = padded[R:R + hy, R:R + hx]
        b = padded[R + dy:R + dy + hy, R + dx:R + dx + hx]
        diff = a - b
        centre = diff[P:P + Y, P:P + X]
        expo = np.zeros((Y, X))
        for oy, ox in patch:
            shifted = diff[P + oy:P + oy + Y, P + ox:P + ox + X]
            expo += inv_c * np.sum(shifted**2, axis=2)
            expo += inv_g * np.sum((centre - shifted) ** 2, axis=2)
        ps, _ = pair_slices(int(dy), int(dx), (Y, X))
        # capped so the weight stays strictly positive in float64
        weights[k][ps] = np.exp(-np.minimum(expo[ps], _MAX_EXPONENT))
        valid[k][ps] = True

    _parallel.ordered_map(work, range(len(offsets)))
    return NlmWeightGraph(offsets, weights, valid)


def check_graph(graph, shape):
    if tuple(graph.shape) != tuple(shape):
        raise DimensionMismatch(f"weight graph {graph.shape} vs map {shape}")
