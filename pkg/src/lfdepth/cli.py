"""Command-line entry point: ``lfdepth <command> ...``.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import _parallel
from .errors import LightFieldError, MissingView
from .evaluation import (PipelineConfig, evaluate, evaluate_dataset, evaluation_mask,
                         rmse, run_pipeline, write_metrics)
from .lightfield import (load_coherence, load_depthmap, load_image, load_lightfield,
                         save_coherence, save_depthmap, save_lightfield)
from .local_depth import fuse_estimates, local_depth_all
from .nlm import nlm_weights
from .propagation import propagate
from .refine import refine_depth
from .renderer import TriangularKernel, render_lightfield
from . import synthgen


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


_DEFAULTS = PipelineConfig()

# (flag, config field, type, help)
PIPELINE_FLAGS = [
    ("--sigma", "sigma", float, "[paper] structure-tensor outer scale"),
    ("--tau", "tau", float, "[paper] structure-tensor inner scale"),
    ("--coherence-threshold", "coherence_threshold", float, "[default] minimum coherence of a seed pixel"),
    ("--m-min", "m_min", float, "[default] lower disparity bound (px per view)"),
    ("--m-max", "m_max", float, "[default] upper disparity bound (px per view)"),
    ("--search-radius", "search_radius", int, "[paper] NLM search half-width (5 -> 11x11)"),
    ("--patch-radius", "patch_radius", int, "[paper] NLM patch half-width (1 -> 3x3)"),
    ("--sigma-color-sq", "sigma_color_sq", float, "[default] NLM color variance"),
    ("--sigma-grad-sq", "sigma_grad_sq", float, "[default] NLM gradient variance"),
    ("--prop-max-iters", "prop_max_iters", int, "[default] propagation iteration cap"),
    ("--prop-tol", "prop_grad_tol", float, "[default] propagation gradient tolerance"),
    ("--lambda", "lam", float, "[default] NLM prior weight in refinement"),
    ("--max-iters", "max_iters", int, "[default] refinement iteration cap"),
    ("--grad-tol", "grad_tol", float, "[default] refinement projected-gradient tolerance"),
    ("--eps", "kernel_eps", float, "[default] kernel smoothing half-width (px)"),
    ("--mass-tolerance", "mass_tolerance", float, "[default] evidence band around unit kernel mass"),
    ("--mask-rounds", "mask_rounds", int, "[default] evidence-mask refreshes during refinement"),
]


def _add_pipeline_flags(p):
    g = p.add_argument_group("pipeline parameters")
    g.add_argument("--config", help="JSON file with pipeline parameters (flags override it)")
    for flag, name, typ, text in PIPELINE_FLAGS:
        g.add_argument(flag, dest=name, type=typ, default=None,
                       help=f"{text} (default: {getattr(_DEFAULTS, name)})")
    g.add_argument("--no-refine", dest="refine", action="store_false", default=None,
                   help="[default] stop after propagation")


def _add_common(p):
    p.add_argument("--threads", type=int, default=None,
                   help="[default] worker threads; results do not depend on it (default: 1)")
    p.add_argument("--seed", type=int, default=None, help="[default] random seed (default: 0)")


def build_parser():
    parser = _Parser(prog="lfdepth", description="Continuous depth from 4D light fields.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="synthesize a scene into a light-field directory")
    p.add_argument("--spec", required=True, help="scene JSON")
    p.add_argument("--out", required=True, help="output light-field directory")
    p.add_argument("--gt", help="ground-truth PFM (default: <out>/gt.pfm)")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)
    _add_common(p)

    p = sub.add_parser("render", help="forward-render a light field from a center image and depth")
    p.add_argument("--center", required=True, help="center image (PNG)")
    p.add_argument("--depth", required=True, help="depth PFM")
    p.add_argument("--views", type=int, nargs=2, metavar=("S", "T"), default=(7, 7))
    p.add_argument("--out", required=True, help="output light-field directory")
    p.add_argument("--eps", type=float, default=_DEFAULTS.kernel_eps,
                   help="[default] kernel smoothing half-width")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)
    _add_common(p)

    p = sub.add_parser("local", help="structure-tensor depth, thresholded and fused")
    p.add_argument("--input", required=True, help="light-field directory")
    p.add_argument("--output", required=True, help="m_init PFM (NaN = non-defined)")
    p.add_argument("--coherence-out", help="coherence PFM (default: <output stem>_coherence.pfm)")
    _add_pipeline_flags(p)
    _add_common(p)

    p = sub.add_parser("propagate", help="fill non-coherent pixels")
    p.add_argument("--input", required=True, help="light-field directory")
    p.add_argument("--init", required=True, help="m_init PFM")
    p.add_argument("--coherence", required=True, help="coherence PFM")
    p.add_argument("--output", required=True)
    _add_pipeline_flags(p)
    _add_common(p)

    p = sub.add_parser("refine", help="refine a depth map through the generative model")
    p.add_argument("--input", required=True, help="light-field directory")
    p.add_argument("--init", required=True, help="fully defined depth PFM")
    p.add_argument("--output", required=True)
    p.add_argument("--diagnostics", help="CSV of iteration, loss, grad_norm, seconds")
    _add_pipeline_flags(p)
    _add_common(p)

    p = sub.add_parser("estimate", help="full pipeline")
    p.add_argument("--input", required=True, help="light-field directory")
    p.add_argument("--output", required=True, help="depth PFM")
    p.add_argument("--stages-dir", help="write every stage's maps, timings and trace here")
    _add_pipeline_flags(p)
    _add_common(p)

    p = sub.add_parser("eval", help="score depth against ground truth")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="light-field directory")
    src.add_argument("--dataset", help="directory of scene directories, each with gt.pfm")
    p.add_argument("--gt", help="ground-truth PFM (default: <input>/gt.pfm)")
    p.add_argument("--estimate", help="score this depth PFM instead of running the pipeline")
    p.add_argument("--metrics", help="metrics CSV (default: <input>/metrics.csv)")
    p.add_argument("--scene", help="scene name in the CSV (default: input directory name)")
    p.add_argument("--stages-dir", help="write every stage's maps here")
    _add_pipeline_flags(p)
    _add_common(p)
    return parser


def config_from_args(args):
    cfg = PipelineConfig.from_json(args.config) if getattr(args, "config", None) else PipelineConfig()
    d = cfg.to_dict()
    for _, name, _, _ in PIPELINE_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    if getattr(args, "refine", None) is not None:
        d["refine"] = args.refine
    if getattr(args, "threads", None) is not None:
        d["threads"] = args.threads
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    return PipelineConfig.from_dict(d)


def _cmd_gen(args):
    spec = synthgen.load_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    lf, gt = synthgen.generate(spec)
    save_lightfield(lf, args.out, args.bit_depth)
    save_depthmap(gt, args.gt or Path(args.out) / "gt.pfm")


def _cmd_render(args):
    center = load_image(args.center)
    depth = load_depthmap(args.depth)
    lf = render_lightfield(center, depth, tuple(args.views), TriangularKernel(args.eps))
    save_lightfield(lf, args.out, args.bit_depth)


def _cmd_local(args, cfg):
    lf = load_lightfield(args.input)
    h, v = local_depth_all(lf, cfg.structure_tensor())
    m_init, c_init = fuse_estimates(h, v, cfg.coherence_threshold)
    save_depthmap(m_init, args.output)
    out = Path(args.output)
    save_coherence(c_init, args.coherence_out or out.with_name(out.stem + "_coherence.pfm"))


def _cmd_propagate(args, cfg):
    lf = load_lightfield(args.input)
    m_init = load_depthmap(args.init)
    c = load_coherence(args.coherence)
    w = nlm_weights(lf.center_image(), cfg.nlm())
    save_depthmap(propagate(m_init, c, w, cfg.propagation()), args.output)


def _cmd_refine(args, cfg):
    lf = load_lightfield(args.input)
    m0 = load_depthmap(args.init)
    depth, diag = refine_depth(lf, m0, cfg.refinement())
    save_depthmap(depth, args.output)
    if args.diagnostics:
        diag.write_csv(args.diagnostics)


def _cmd_estimate(args, cfg):
    lf = load_lightfield(args.input)
    result = run_pipeline(lf, cfg, args.stages_dir)
    save_depthmap(result.depth, args.output)


def _cmd_eval(args, cfg):
    if args.dataset:
        rows, mean = evaluate_dataset(args.dataset, cfg)
        write_metrics(rows, args.metrics or Path(args.dataset) / "metrics.csv")
        print(f"mean RMSE over {len({r['scene'] for r in rows})} scenes: {mean:.6f}")
        return
    lf_dir = Path(args.input)
    gt_path = Path(args.gt) if args.gt else lf_dir / "gt.pfm"
    if not gt_path.is_file():
        raise MissingView(f"ground truth {gt_path} not found")
    gt = load_depthmap(gt_path)
    scene = args.scene or lf_dir.name
    lf = load_lightfield(lf_dir)
    if args.estimate:
        est = load_depthmap(args.estimate)
        rows = [{"scene": scene, "stage": "estimate", "seconds": 0.0,
                 "rmse": rmse(est, gt, evaluation_mask(gt, lf.S, lf.T))}]
    else:
        rows, _ = evaluate(lf, gt, cfg, scene, args.stages_dir)
    write_metrics(rows, args.metrics or lf_dir / "metrics.csv")
    for r in rows:
        print(f"{r['scene']}\t{r['stage']}\trmse={r['rmse']:.6f}\t{r['seconds']:.2f}s")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    try:
        if args.command in ("gen", "render"):
            _parallel.set_threads(args.threads or 1)
            {"gen": _cmd_gen, "render": _cmd_render}[args.command](args)
        else:
            cfg = config_from_args(args)
            _parallel.set_threads(cfg.threads)
            handler = {"local": _cmd_local, "propagate": _cmd_propagate, "refine": _cmd_refine,
                       "estimate": _cmd_estimate, "eval": _cmd_eval}[args.command]
            handler(args, cfg)
    except (LightFieldError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
