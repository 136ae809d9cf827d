"""Depth refinement through the generative light-field model.

Minimizes ``||L_m - L||^2 + lambda * R(m)`` with the NLM prior
``R(m) = sum_p sum_{q in N(p)} w_pq (m(p) - m(q))^2`` under box bounds.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .lightfield import DepthMap, LightField
from .nlm import NlmParams, check_graph, nlm_weights
from .optimize import OptimizerParams, minimize_image
from .renderer import TriangularKernel, evidence_mask, render_gradient


@dataclass(frozen=True)
class RefineParams:
    lam: float = 0.1
    nlm: NlmParams = field(default_factory=NlmParams)
    m_min: float = -2.0
    m_max: float = 2.0
    max_iters: int = 100
    grad_tol: float = 1e-5
    history: int = 10
    kernel_eps: float = 1e-3
    # samples whose accumulated kernel mass is off 1 by more than this carry no evidence
    mass_tolerance: float = 0.1
    # the evidence mask is recomputed from the current depth between rounds
    mask_rounds: int = 4

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.m_min < self.m_max:
            raise ValueError("m_min must be < m_max")


def nlm_prior_and_gradient(m, weights):
    m = np.asarray(m.values if isinstance(m, DepthMap) else m, dtype=np.float64)
    check_graph(weights, m.shape)
    r = 0.0
    g = np.zeros(m.shape)
    for _, _, ps, qs, w in weights.pairs():
        diff = m[ps] - m[qs]
        r += float(np.sum(w * diff * diff))
        g[ps] += 2.0 * w * diff
        g[qs] -= 2.0 * w * diff
    return r, g


class RefineObjective:
    """``f(m) = data(m) + lam * R(m)`` with its gradient."""

    def __init__(self, lf: LightField, params: RefineParams, weights=None):
        self.lf = lf
        self.center = lf.center_image()
        self.params = params
        self.kernel = TriangularKernel(params.kernel_eps)
        if weights is None and params.lam > 0:
            weights = nlm_weights(self.center, params.nlm)
        if weights is not None:
            check_graph(weights, (lf.Y, lf.X))
        self.weights = weights
        self.sample_weights = None

    def update_mask(self, m):
        self.sample_weights = evidence_mask(self.center, m, (self.lf.S, self.lf.T), self.kernel,
                                            self.params.mass_tolerance)

    def data(self, m):
        return render_gradient(self.center, m, self.lf, self.kernel, self.sample_weights)

    def prior(self, m):
        if self.params.lam == 0 or self.weights is None:
            return 0.0, np.zeros(np.shape(m))
        return nlm_prior_and_gradient(m, self.weights)

    def __call__(self, m):
        fd, gd = self.data(m)
        if self.params.lam == 0:
            return fd, gd
        fr, gr = self.prior(m)
        return fd + self.params.lam * fr, gd + self.params.lam * gr


@dataclass
class RefineDiagnostics:
    trace: object
    initial_loss: float
    final_loss: float
    seconds: float
    # index into trace.records where each evidence-mask round begins; the
    # loss is monotone within a round but jumps when the mask is refreshed
    round_starts: list = field(default_factory=list)

    def write_csv(self, path):
        self.trace.write_csv(path)


def refine_depth(lf: LightField, m0: DepthMap, params=RefineParams(), weights=None):
    """Bounded quasi-Newton refinement of a fully defined depth map."""
    if not isinstance(m0, DepthMap):
        m0 = DepthMap(m0)
    if m0.shape != (lf.Y, lf.X):
        raise DimensionMismatch(f"depth {m0.shape} vs light field {(lf.Y, lf.X)}")
    if not m0.fully_defined:
        raise ValueError("initial depth map must be fully defined")
    t0 = time.perf_counter()
    objective = RefineObjective(lf, params, weights)
    m = np.clip(m0.values, params.m_min, params.m_max)
    rounds = max(1, params.mask_rounds)
    trace = None
    starts = []
    for k in range(rounds):
        objective.update_mask(m)
        iters = params.max_iters // rounds + (1 if k < params.max_iters % rounds else 0)
        opt = OptimizerParams(iters, params.grad_tol, params.history)
        m, f, tr = minimize_image(objective, m, opt, bounds=(params.m_min, params.m_max))
        starts.append(0 if trace is None else len(trace.records))
        trace = tr if trace is None else trace.extend(tr)
    m = np.clip(m, params.m_min, params.m_max)
    diag = RefineDiagnostics(trace, trace.records[0][1], f, time.perf_counter() - t0, starts)
    return DepthMap(m), diag
