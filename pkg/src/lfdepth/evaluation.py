"""Metrics and the end-to-end estimation harness."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _parallel
from .errors import DimensionMismatch, EmptyMask
from .lightfield import (DepthMap, LightField, load_depthmap, load_lightfield,
                         save_coherence, save_depthmap)
from .local_depth import StructureTensorParams, fuse_estimates, local_depth_all
from .nlm import NlmParams, nlm_weights
from .optimize import OptimizerParams
from .propagation import propagate
from .refine import RefineParams, refine_depth


@dataclass
class PipelineConfig:
    """Every tunable of the pipeline; mirrors the CLI flags one to one."""
    sigma: float = 1.0
    tau: float = 0.5
    coherence_threshold: float = 0.8
    m_min: float = -2.0
    m_max: float = 2.0
    search_radius: int = 5
    patch_radius: int = 1
    sigma_color_sq: float = 0.005
    sigma_grad_sq: float = 0.1
    prop_max_iters: int = 500
    prop_grad_tol: float = 1e-6
    lam: float = 0.1
    max_iters: int = 100
    grad_tol: float = 1e-5
    kernel_eps: float = 1e-3
    mass_tolerance: float = 0.1
    mask_rounds: int = 4
    refine: bool = True
    threads: int = 1
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return dataclasses.asdict(self)

    def structure_tensor(self):
        return StructureTensorParams(self.sigma, self.tau, self.m_min, self.m_max)

    def nlm(self):
        return NlmParams(self.search_radius, self.patch_radius, self.sigma_color_sq, self.sigma_grad_sq)

    def propagation(self):
        return OptimizerParams(self.prop_max_iters, self.prop_grad_tol)

    def refinement(self):
        return RefineParams(lam=self.lam, nlm=self.nlm(), m_min=self.m_min, m_max=self.m_max,
                            max_iters=self.max_iters, grad_tol=self.grad_tol,
                            kernel_eps=self.kernel_eps, mass_tolerance=self.mass_tolerance,
                            mask_rounds=self.mask_rounds)


@dataclass
class PipelineResult:
    depth: DepthMap
    stages: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    total_seconds: float = 0.0
    refine_diagnostics: object = None


def rmse(est, gt, mask=None):
    e = est.values if isinstance(est, DepthMap) else np.asarray(est, dtype=np.float64)
    g = gt.values if isinstance(gt, DepthMap) else np.asarray(gt, dtype=np.float64)
    if e.shape != g.shape:
        raise DimensionMismatch(f"estimate {e.shape} vs ground truth {g.shape}")
    sel = np.isfinite(e) & np.isfinite(g)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != e.shape:
            raise DimensionMismatch(f"mask {mask.shape} vs depth {e.shape}")
        sel &= mask
    if not sel.any():
        raise EmptyMask("no pixels selected for RMSE")
    d = e[sel] - g[sel]
    return float(np.sqrt(np.mean(d * d)))


def border_width(max_abs_m, S, T):
    """Border without forward-model evidence: ``ceil(max|m| * max|d|)``."""
    d = max(S // 2, S - 1 - S // 2, T // 2, T - 1 - T // 2)
    return int(math.ceil(max_abs_m * d))


def evaluation_mask(gt, S, T):
    g = gt.values if isinstance(gt, DepthMap) else np.asarray(gt)
    b = border_width(float(np.nanmax(np.abs(g))), S, T)
    mask = np.zeros(g.shape, dtype=bool)
    Y, X = g.shape
    if 2 * b < Y and 2 * b < X:
        mask[b:Y - b, b:X - b] = True
    return mask


def run_pipeline(lf: LightField, config=PipelineConfig(), out_dir=None) -> PipelineResult:
    """local depth -> fusion -> NLM propagation -> generative refinement."""
    _parallel.set_threads(config.threads)
    result = PipelineResult(None)
    timings = result.timings
    t_start = time.perf_counter()

    def timed(name, fn):
        t = time.perf_counter()
        out = fn()
        timings[name] = time.perf_counter() - t
        return out

    horiz, vert = timed("local", lambda: local_depth_all(lf, config.structure_tensor()))
    m_init, c_init = timed("fuse", lambda: fuse_estimates(horiz, vert, config.coherence_threshold))
    weights = timed("weights", lambda: nlm_weights(lf.center_image(), config.nlm()))
    m_prop = timed("propagate", lambda: propagate(m_init, c_init, weights, config.propagation()))
    result.stages.update({
        "local_h": horiz.depth, "local_v": vert.depth,
        "coherence_h": horiz.coherence, "coherence_v": vert.coherence,
        "m_init": m_init, "coherence": c_init, "propagated": m_prop,
    })
    depth = m_prop
    if config.refine:
        depth, diag = timed("refine", lambda: refine_depth(lf, m_prop, config.refinement(), weights))
        result.stages["refined"] = depth
        result.refine_diagnostics = diag
    result.depth = depth
    result.total_seconds = time.perf_counter() - t_start
    if out_dir is not None:
        save_artifacts(result, out_dir)
    return result


def save_artifacts(result: PipelineResult, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, item in result.stages.items():
        if isinstance(item, DepthMap):
            save_depthmap(item, out / f"{name}.pfm")
        else:
            save_coherence(item, out / f"{name}.pfm")
    with open(out / "timings.json", "w") as fh:
        json.dump({"stages": result.timings, "total": result.total_seconds}, fh, indent=2)
    if result.refine_diagnostics is not None:
        result.refine_diagnostics.write_csv(out / "refine_trace.csv")


STAGE_COLUMNS = ("m_init", "propagated", "refined")


def evaluate(lf, gt, config=PipelineConfig(), scene="scene", out_dir=None):
    """Run the pipeline and score each stage; returns ``(rows, result)``.

    Rows are dicts with keys ``scene, stage, rmse, seconds``; ``seconds`` is
    the cumulative wall time up to and including that stage.
    """
    result = run_pipeline(lf, config, out_dir)
    mask = evaluation_mask(gt, lf.S, lf.T)
    t = result.timings
    cumulative = {
        "m_init": t["local"] + t["fuse"],
        "propagated": t["local"] + t["fuse"] + t["weights"] + t["propagate"],
        "refined": result.total_seconds,
    }
    rows = []
    for stage in STAGE_COLUMNS:
        if stage in result.stages:
            rows.append({"scene": scene, "stage": stage,
                         "rmse": rmse(result.stages[stage], gt, mask),
                         "seconds": cumulative[stage]})
    rows.append({"scene": scene, "stage": "final", "rmse": rmse(result.depth, gt, mask),
                 "seconds": result.total_seconds})
    return rows, result


def write_metrics(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["scene", "stage", "rmse", "seconds"])
        w.writeheader()
        for r in rows:
            w.writerow({"scene": r["scene"], "stage": r["stage"],
                        "rmse": f"{r['rmse']:.6f}", "seconds": f"{r['seconds']:.3f}"})


def evaluate_dataset(root, config=PipelineConfig(), gt_name="gt.pfm"):
    """Score every ``<root>/<scene>/`` holding a light-field directory and ``gt_name``.

    Returns ``(rows, mean_final_rmse)``.  No pass threshold is applied.
    """
    rows = []
    finals = []
    for scene_dir in sorted(p for p in Path(root).iterdir() if p.is_dir()):
        if not (scene_dir / "manifest.json").is_file() or not (scene_dir / gt_name).is_file():
            continue
        lf = load_lightfield(scene_dir)
        gt = load_depthmap(scene_dir / gt_name)
        scene_rows, _ = evaluate(lf, gt, config, scene_dir.name)
        rows += scene_rows
        finals.append(scene_rows[-1]["rmse"])
    return rows, (float(np.mean(finals)) if finals else float("nan"))
