"""Bound-constrained limited-memory quasi-Newton driver.

Thin wrapper over SciPy's L-BFGS-B that works on 2-D parameter images and
records a per-iteration trace.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, minimize

from .errors import NonFiniteLoss


@dataclass(frozen=True)
class OptimizerParams:
    max_iters: int = 500
    grad_tol: float = 1e-6
    history: int = 10


@dataclass
class Trace:
    """Per-iteration records ``(iteration, loss, grad_norm, seconds)``."""
    records: list = field(default_factory=list)
    message: str = ""
    n_evals: int = 0

    def extend(self, other):
        """Append a later run, continuing the iteration count and clock.

        The later run's starting record is kept, so the iteration where
        the two runs meet appears twice (once per objective).
        """
        it0 = self.records[-1][0] if self.records else 0
        sec0 = self.records[-1][3] if self.records else 0.0
        for it, loss, gn, sec in other.records:
            self.records.append((it0 + it, loss, gn, sec0 + sec))
        self.message = other.message
        self.n_evals += other.n_evals
        return self

    @property
    def losses(self):
        return [r[1] for r in self.records]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "loss", "grad_norm", "seconds"])
            for it, loss, gn, sec in self.records:
                w.writerow([it, repr(loss), repr(gn), f"{sec:.6f}"])


def minimize_image(fun_grad, x0, opt=OptimizerParams(), bounds=None):
    """Minimize ``fun_grad(x) -> (f, grad)`` over images shaped like ``x0``.

    ``bounds`` is ``(lo, hi)`` applied to every pixel, or ``None``.
    Returns ``(x, f, trace)``.
    """
    shape = np.shape(x0)
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    if bounds is not None:
        x0 = np.clip(x0, bounds[0], bounds[1])
    last = {}
    trace = Trace()
    t0 = time.perf_counter()

    def fg(x):
        f, g = fun_grad(x.reshape(shape))
        f = float(f)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise NonFiniteLoss(f"objective returned non-finite value {f}")
        g = np.asarray(g, dtype=np.float64).ravel()
        last["x"], last["f"], last["g"] = x.copy(), f, g
        trace.n_evals += 1
        return f, g

    def projected_norm(x, g):
        if bounds is None:
            return float(np.max(np.abs(g), initial=0.0))
        pg = np.clip(x - g, bounds[0], bounds[1]) - x
        return float(np.max(np.abs(pg), initial=0.0))

    f0, g0 = fg(x0)
    trace.records.append((0, f0, projected_norm(x0, g0), time.perf_counter() - t0))
    best = (f0, x0.copy())

    def callback(intermediate_result):
        x = intermediate_result.x
        if "x" in last and np.array_equal(last["x"], x):
            f, g = last["f"], last["g"]
        else:
            f, g = fg(x)
        trace.records.append((len(trace.records), f, projected_norm(x, g), time.perf_counter() - t0))

    res = minimize(
        fg, x0, jac=True, method="L-BFGS-B",
        bounds=None if bounds is None else Bounds(np.full(x0.size, bounds[0]), np.full(x0.size, bounds[1])),
        callback=callback,
        options={"maxcor": opt.history, "maxiter": opt.max_iters, "gtol": opt.grad_tol,
                 "ftol": 0.0, "maxfun": max(15000, 20 * opt.max_iters)},
    )
    trace.message = str(res.message)
    x, f = res.x, float(res.fun)
    if f > best[0]:
        x, f = best[1], best[0]
    return x.reshape(shape), f, trace


def write_trace(trace, path):
    trace.write_csv(path)
