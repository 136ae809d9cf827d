"""Fill non-coherent pixels of the rough depth map.

Minimizes the convex quadratic

    E(m) = sum_p sum_{q in N(p)} w_pq [ (m(p) - m(q))^2 + C(p) (m_init(p) - m(q))^2 ]

where the coherence-weighted anchor ties the *neighbor* ``q`` to the seed
value at ``p``.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NoCoherentPixels
from .lightfield import CoherenceMap, DepthMap
from .nlm import check_graph
from .optimize import OptimizerParams, minimize_image


def _arrays(m_init, C):
    mi = m_init.values if isinstance(m_init, DepthMap) else np.asarray(m_init, dtype=np.float64)
    mask = m_init.mask if isinstance(m_init, DepthMap) else np.isfinite(mi)
    c = C.values if isinstance(C, CoherenceMap) else np.asarray(C, dtype=np.float64)
    if mi.shape != c.shape:
        raise DimensionMismatch(f"m_init {mi.shape} vs coherence {c.shape}")
    c = np.where(mask, c, 0.0)
    mi = np.where(mask, mi, 0.0)
    return mi, mask, c


def propagation_objective_and_gradient(m, m_init, C, weights):
    m = np.asarray(m, dtype=np.float64)
    mi, _, c = _arrays(m_init, C)
    if m.shape != mi.shape:
        raise DimensionMismatch(f"m {m.shape} vs m_init {mi.shape}")
    check_graph(weights, m.shape)
    f = 0.0
    g = np.zeros(m.shape)
    for _, _, ps, qs, w in weights.pairs():
        diff = m[ps] - m[qs]
        anchor = mi[ps] - m[qs]
        cw = c[ps] * w
        f += float(np.sum(w * diff * diff + cw * anchor * anchor))
        g[ps] += 2.0 * w * diff
        g[qs] -= 2.0 * (w * diff + cw * anchor)
    return f, g


def initial_guess(m_init):
    """Defined pixels keep their value, the rest start at the mean of the defined ones."""
    vals, mask = m_init.values, m_init.mask
    if not mask.any():
        raise NoCoherentPixels("depth map has no defined pixels")
    return np.where(mask, vals, float(np.mean(vals[mask])))


def propagate(m_init: DepthMap, C: CoherenceMap, weights, opt=OptimizerParams(), return_trace=False):
    mi, mask, c = _arrays(m_init, C)
    check_graph(weights, mi.shape)
    if not np.any(c > 0):
        raise NoCoherentPixels("all coherences are zero; nothing anchors the propagation")
    x0 = initial_guess(DepthMap(np.where(mask, mi, np.nan)))
    m, _, trace = minimize_image(
        lambda x: propagation_objective_and_gradient(x, m_init, C, weights), x0, opt)
    out = DepthMap(m)
    return (out, trace) if return_trace else out
