"""Synthetic layered scenes with known disparity.

Views are produced by inverse warping: for every target pixel of view
``(s, t)`` the center-view coordinate it came from is solved in closed form
for each layer's planar disparity, and the layer texture is bilinearly
sampled there.  This path shares no code with :mod:`lfdepth.renderer` so the
two can check each other.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from . import _parallel
from .errors import InvalidSpec
from .lightfield import DepthMap, LightField, center_index

TEXTURES = ("noise", "checkerboard", "gradient")


@dataclass
class Layer:
    """A textured plane.

    ``disparity`` is ``(a, b, c)`` for ``m = a*x + b*y + c`` in center-view
    pixel coordinates.  ``region`` is ``(y0, x0, y1, x1)`` in center-view
    coordinates, or ``None`` for the full frame.
    """
    disparity: tuple = (0.0, 0.0, 0.0)
    texture: dict = field(default_factory=lambda: {"kind": "noise"})
    region: Optional[tuple] = None

    @classmethod
    def from_dict(cls, d):
        disp = d.get("disparity", 0.0)
        if isinstance(disp, (int, float)):
            disp = (0.0, 0.0, float(disp))
        elif isinstance(disp, dict):
            disp = (float(disp.get("a", 0.0)), float(disp.get("b", 0.0)), float(disp.get("c", 0.0)))
        else:
            disp = tuple(float(v) for v in disp)
        tex = d.get("texture", "noise")
        if isinstance(tex, str):
            tex = {"kind": tex}
        region = d.get("region")
        return cls(disp, dict(tex), tuple(region) if region is not None else None)

    def to_dict(self):
        a, b, c = self.disparity
        return {"disparity": {"a": a, "b": b, "c": c}, "texture": self.texture,
                "region": list(self.region) if self.region is not None else None}


@dataclass
class SceneSpec:
    height: int
    width: int
    angular_rows: int = 7
    angular_cols: int = 7
    layers: list = field(default_factory=list)
    channels: int = 3
    seed: int = 0
    m_min: float = -2.0
    m_max: float = 2.0

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                height=int(d["height"]), width=int(d["width"]),
                angular_rows=int(d.get("angular_rows", 7)), angular_cols=int(d.get("angular_cols", 7)),
                layers=[Layer.from_dict(l) for l in d["layers"]],
                channels=int(d.get("channels", 3)), seed=int(d.get("seed", 0)),
                m_min=float(d.get("m_min", -2.0)), m_max=float(d.get("m_max", 2.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"bad scene description: {exc}") from exc

    def to_dict(self):
        return {"height": self.height, "width": self.width,
                "angular_rows": self.angular_rows, "angular_cols": self.angular_cols,
                "channels": self.channels, "seed": self.seed,
                "m_min": self.m_min, "m_max": self.m_max,
                "layers": [l.to_dict() for l in self.layers]}


def load_spec(path) -> SceneSpec:
    with open(path) as fh:
        try:
            return SceneSpec.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"{path}: {exc}") from exc


def save_spec(spec: SceneSpec, path):
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)


def constant_scene(disparity, size=128, views=7, seed=0, texture="noise"):
    return SceneSpec(size, size, views, views,
                     [Layer((0.0, 0.0, float(disparity)), {"kind": texture})], seed=seed)


def two_region_scene(outer, inner, size=128, views=7, seed=0):
    """Background plane with a centered rectangle at a different disparity."""
    q = size // 4
    return SceneSpec(size, size, views, views, [
        Layer((0.0, 0.0, float(outer)), {"kind": "noise", "low": 0.05, "high": 0.55}),
        Layer((0.0, 0.0, float(inner)), {"kind": "noise", "low": 0.45, "high": 0.95},
              region=(q, q, size - q, size - q)),
    ], seed=seed)


def _max_offsets(spec):
    sc, tc = center_index(spec.angular_rows), center_index(spec.angular_cols)
    ds = max(sc, spec.angular_rows - 1 - sc)
    dt = max(tc, spec.angular_cols - 1 - tc)
    return ds, dt


def _layer_disparity(layer, yy, xx):
    a, b, c = layer.disparity
    return a * xx + b * yy + c


def validate(spec: SceneSpec):
    if spec.height < 2 or spec.width < 2:
        raise InvalidSpec("image dims must be >= 2")
    if spec.angular_rows < 1 or spec.angular_cols < 1:
        raise InvalidSpec("angular dims must be >= 1")
    if spec.channels not in (1, 3):
        raise InvalidSpec("channels must be 1 or 3")
    if not spec.layers:
        raise InvalidSpec("scene needs at least one layer")
    if not spec.m_min < spec.m_max:
        raise InvalidSpec("m_min must be < m_max")
    ds_max, dt_max = _max_offsets(spec)
    yy, xx = np.mgrid[0:spec.height, 0:spec.width]
    for i, layer in enumerate(spec.layers):
        kind = layer.texture.get("kind")
        if kind not in TEXTURES:
            raise InvalidSpec(f"layer {i}: unknown texture {kind!r}")
        a, b, _ = layer.disparity
        # keeps the per-view coordinate map invertible
        if abs(a) * dt_max + abs(b) * ds_max >= 1.0:
            raise InvalidSpec(f"layer {i}: disparity ramp too steep for the angular extent")
        if layer.region is not None:
            y0, x0, y1, x1 = layer.region
            if not (y0 < y1 and x0 < x1):
                raise InvalidSpec(f"layer {i}: empty region")
        d = _layer_disparity(layer, yy, xx)
        if d.min() < spec.m_min or d.max() > spec.m_max:
            raise InvalidSpec(f"layer {i}: disparity outside [{spec.m_min}, {spec.m_max}]")


def _margin(spec):
    ds_max, dt_max = _max_offsets(spec)
    m = max(abs(spec.m_min), abs(spec.m_max))
    return int(math.ceil(m * max(ds_max, dt_max))) + 2


def _texture(kind_spec, shape, channels, rng):
    kind = kind_spec["kind"]
    lo = float(kind_spec.get("low", 0.1))
    hi = float(kind_spec.get("high", 0.9))
    H, W = shape
    if kind == "noise":
        sigma = float(kind_spec.get("smooth", 1.0))
        raw = rng.uniform(size=(H, W, channels))
        tex = ndimage.gaussian_filter(raw, sigma=(sigma, sigma, 0), mode="reflect")
        tex = (tex - tex.min()) / max(tex.max() - tex.min(), 1e-12)
    elif kind == "checkerboard":
        p = int(kind_spec.get("period", 8))
        iy, ix = np.mgrid[0:H, 0:W]
        tex = (((iy // p) + (ix // p)) % 2).astype(np.float64)[..., None].repeat(channels, axis=2)
    else:
        ramp = np.linspace(0.0, 1.0, W)[None, :].repeat(H, axis=0)
        tex = ramp[..., None].repeat(channels, axis=2)
    return lo + (hi - lo) * tex


def _bilinear(tex, u, v):
    """Sample ``tex`` (H, W, C) at continuous row ``u`` and column ``v``."""
    H, W = tex.shape[:2]
    u = np.clip(u, 0.0, H - 1.0)
    v = np.clip(v, 0.0, W - 1.0)
    u0 = np.minimum(np.floor(u).astype(np.intp), H - 2)
    v0 = np.minimum(np.floor(v).astype(np.intp), W - 2)
    fu = (u - u0)[..., None]
    fv = (v - v0)[..., None]
    return ((1 - fu) * (1 - fv) * tex[u0, v0] + (1 - fu) * fv * tex[u0, v0 + 1]
            + fu * (1 - fv) * tex[u0 + 1, v0] + fu * fv * tex[u0 + 1, v0 + 1])


def _source_coords(layer, y, x, ds, dt):
    """Center-view coordinate that lands on ``(y, x)`` in view offset (ds, dt)."""
    a, b, c = layer.disparity
    rx = x - c * dt
    ry = y - c * ds
    det = 1.0 + a * dt + b * ds
    xc = (rx * (1.0 + b * ds) - b * dt * ry) / det
    yc = ((1.0 + a * dt) * ry - a * ds * rx) / det
    return yc, xc


def _in_region(layer, yc, xc):
    if layer.region is None:
        return np.ones(np.shape(yc), dtype=bool)
    y0, x0, y1, x1 = layer.region
    return (yc >= y0) & (yc < y1) & (xc >= x0) & (xc < x1)


def generate(spec: SceneSpec):
    """Render the scene; returns ``(LightField, ground-truth DepthMap)``.

    Layers are painted in order, so a later layer covers earlier ones
    wherever its region maps onto the view.
    """
    validate(spec)
    H, W, C = spec.height, spec.width, spec.channels
    M = _margin(spec)
    textures = [
        _texture(l.texture, (H + 2 * M, W + 2 * M), C, np.random.default_rng([spec.seed, i]))
        for i, l in enumerate(spec.layers)
    ]
    S, T = spec.angular_rows, spec.angular_cols
    sc, tc = center_index(S), center_index(T)
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    samples = np.zeros((S, T, H, W, C))

    def view(st):
        s, t = st
        ds, dt = s - sc, t - tc
        out = samples[s, t]
        for layer, tex in zip(spec.layers, textures):
            yc, xc = _source_coords(layer, yy, xx, ds, dt)
            hit = _in_region(layer, yc, xc)
            vals = _bilinear(tex, yc + M, xc + M)
            out[hit] = vals[hit]

    _parallel.ordered_map(view, [(s, t) for s in range(S) for t in range(T)])

    gt = np.zeros((H, W))
    for layer in spec.layers:
        hit = _in_region(layer, yy, xx)
        gt[hit] = _layer_disparity(layer, yy, xx)[hit]
    return LightField(np.clip(samples, 0.0, 1.0)), DepthMap(gt)
