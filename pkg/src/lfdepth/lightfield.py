"""Light-field container, sub-aperture / EPI slicing and file I/O.

Samples are stored as a float64 array indexed ``(s, t, y, x, c)``: ``s`` is
the angular row, ``t`` the angular column.  A scene point with disparity
``m`` moves ``m`` pixels along ``x`` per step in ``t`` and ``m`` pixels along
``y`` per step in ``s``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import cv2
import numpy as np

from . import _parallel
from .errors import (CorruptImage, DimensionMismatch, IndexOutOfRange,
                     MalformedManifest, MalformedPfm, MissingView)

MANIFEST = "manifest.json"
DEFAULT_VIEW_PATTERN = "view_{s}_{t}.png"


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


def center_index(n):
    """0-based center of an angular axis of length ``n``."""
    return n // 2


@dataclass(frozen=True)
class LightField:
    samples: np.ndarray

    def __post_init__(self):
        a = self._checked_array(self.samples)
        if a.min() < 0.0 or a.max() > 1.0:
            raise ValueError("light-field samples must lie in [0, 1]")
        object.__setattr__(self, "samples", a)

    @staticmethod
    def _checked_array(samples):
        a = np.asarray(samples)
        if a.ndim == 4:
            a = a[..., None]
        if a.ndim != 5:
            raise DimensionMismatch(f"light field must be rank 5 (s,t,y,x,c), got shape {a.shape}")
        S, T, Y, X, C = a.shape
        if S < 1 or T < 1 or Y < 2 or X < 2 or C not in (1, 3):
            raise DimensionMismatch(f"invalid light-field dims {a.shape}")
        a = _frozen(a)
        if not np.all(np.isfinite(a)):
            raise ValueError("light-field samples must be finite")
        return a

    @classmethod
    def unchecked(cls, samples):
        """Wrap synthesized samples that may leave [0, 1] (overlapping footprints)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "samples", cls._checked_array(samples))
        return obj

    @property
    def shape(self):
        return self.samples.shape

    S = property(lambda self: self.samples.shape[0])
    T = property(lambda self: self.samples.shape[1])
    Y = property(lambda self: self.samples.shape[2])
    X = property(lambda self: self.samples.shape[3])
    C = property(lambda self: self.samples.shape[4])

    @property
    def center(self):
        return center_index(self.S), center_index(self.T)

    def center_image(self) -> "SubApertureImage":
        return subaperture(self, *self.center)


@dataclass(frozen=True)
class SubApertureImage:
    pixels: np.ndarray  # (y, x, c)
    view_index: tuple = (0, 0)

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim == 2:
            p = p[..., None]
        if p.ndim != 3:
            raise DimensionMismatch(f"image must be (y, x, c), got shape {p.shape}")
        if p.flags.writeable:
            p = _frozen(p)
        object.__setattr__(self, "pixels", p)

    @property
    def shape(self):
        return self.pixels.shape


@dataclass(frozen=True)
class Epi:
    """Epipolar-plane image.

    ``horizontal``: fixed ``(y*, s*)``, axes ``(t, x)``.
    ``vertical``: fixed ``(x*, t*)``, axes ``(s, y)``.
    """
    pixels: np.ndarray
    orientation: str
    fixed_indices: tuple


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel slope of the center view, pixels per angular step.

    ``mask`` marks defined entries; ``None`` means every finite entry is
    defined.
    """
    values: np.ndarray
    mask: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DimensionMismatch(f"depth map must be rank 2, got shape {v.shape}")
        if self.mask is None:
            mask = np.isfinite(v)
        else:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != v.shape:
                raise DimensionMismatch("mask shape differs from depth shape")
            if not np.all(np.isfinite(v[mask])):
                raise ValueError("defined depth entries must be finite")
        v = np.where(mask, v, np.nan)
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "mask", _frozen(mask, bool))

    @property
    def shape(self):
        return self.values.shape

    @property
    def fully_defined(self):
        return bool(self.mask.all())


@dataclass(frozen=True)
class CoherenceMap:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DimensionMismatch(f"coherence map must be rank 2, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or v.min(initial=0.0) < 0.0 or v.max(initial=0.0) > 1.0:
            raise ValueError("coherence values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def shape(self):
        return self.values.shape


# --- slicing -------------------------------------------------------------

def _check_index(name, i, n):
    if not (0 <= i < n):
        raise IndexOutOfRange(f"{name}={i} outside [0, {n})")


def subaperture(lf: LightField, s: int, t: int) -> SubApertureImage:
    _check_index("s", s, lf.S)
    _check_index("t", t, lf.T)
    return SubApertureImage(lf.samples[s, t], (s, t))


def epi_h(lf: LightField, y: int, s: int) -> Epi:
    """Horizontal EPI at image row ``y`` of angular row ``s``; shape (T, X, C)."""
    _check_index("y", y, lf.Y)
    _check_index("s", s, lf.S)
    return Epi(lf.samples[s, :, y], "horizontal", (y, s))


def epi_v(lf: LightField, x: int, t: int) -> Epi:
    """Vertical EPI at image column ``x`` of angular column ``t``; shape (S, Y, C)."""
    _check_index("x", x, lf.X)
    _check_index("t", t, lf.T)
    return Epi(lf.samples[:, t, :, x], "vertical", (x, t))


# --- light-field directories ---------------------------------------------

def _read_view(path):
    if not os.path.exists(path):
        raise MissingView(f"missing view file {path}")
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise CorruptImage(f"cannot decode image {path}")
    if img.dtype == np.uint8:
        scale = 255.0
    elif img.dtype == np.uint16:
        scale = 65535.0
    else:
        raise CorruptImage(f"{path}: unsupported pixel type {img.dtype}")
    if img.ndim == 2:
        img = img[..., None]
    elif img.shape[2] == 4:
        img = cv2.cvtColor(img, cv2.COLOR_BGRA2RGB)
    else:
        img = img[..., ::-1]
    return img.astype(np.float64) / scale


def read_manifest(path):
    path = Path(path)
    mpath = path / MANIFEST
    if not mpath.is_file():
        raise MissingView(f"no {MANIFEST} in {path}")
    try:
        with open(mpath) as fh:
            man = json.load(fh)
        dims = {k: int(man[k]) for k in ("angular_rows", "angular_cols", "height", "width", "channels")}
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedManifest(f"{mpath}: {exc}") from exc
    man.update(dims)
    man.setdefault("view_pattern", DEFAULT_VIEW_PATTERN)
    return man


def load_lightfield(path) -> LightField:
    """Load a manifest + PNG-grid directory into a :class:`LightField`."""
    path = Path(path)
    man = read_manifest(path)
    S, T = man["angular_rows"], man["angular_cols"]
    Y, X, C = man["height"], man["width"], man["channels"]
    names = [(s, t, path / man["view_pattern"].format(s=s, t=t)) for s in range(S) for t in range(T)]
    missing = [str(p) for _, _, p in names if not p.is_file()]
    if missing:
        raise MissingView(f"{len(missing)} view(s) missing, first: {missing[0]}")

    views = _parallel.ordered_map(lambda item: _read_view(item[2]), names)
    samples = np.empty((S, T, Y, X, C))
    for (s, t, p), img in zip(names, views):
        if img.shape != (Y, X, C):
            raise DimensionMismatch(f"{p}: shape {img.shape} != manifest {(Y, X, C)}")
        samples[s, t] = img
    return LightField(samples)


def save_lightfield(lf: LightField, path, bit_depth=16):
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    man = {
        "angular_rows": lf.S, "angular_cols": lf.T,
        "height": lf.Y, "width": lf.X, "channels": lf.C,
        "view_pattern": DEFAULT_VIEW_PATTERN, "bit_depth": bit_depth,
    }
    with open(path / MANIFEST, "w") as fh:
        json.dump(man, fh, indent=2)
    dtype, scale = (np.uint8, 255.0) if bit_depth == 8 else (np.uint16, 65535.0)
    for s in range(lf.S):
        for t in range(lf.T):
            img = np.rint(np.clip(lf.samples[s, t], 0.0, 1.0) * scale).astype(dtype)
            img = img[..., 0] if lf.C == 1 else img[..., ::-1]
            cv2.imwrite(str(path / DEFAULT_VIEW_PATTERN.format(s=s, t=t)), img)


def load_image(path) -> SubApertureImage:
    return SubApertureImage(_read_view(path))


def save_image(img, path, bit_depth=16):
    pix = img.pixels if isinstance(img, SubApertureImage) else np.asarray(img)
    if pix.ndim == 2:
        pix = pix[..., None]
    dtype, scale = (np.uint8, 255.0) if bit_depth == 8 else (np.uint16, 65535.0)
    out = np.rint(np.clip(pix, 0, 1) * scale).astype(dtype)
    out = out[..., 0] if out.shape[2] == 1 else out[..., ::-1]
    cv2.imwrite(str(path), out)


# --- PFM ---------------------------------------------------------------

def write_pfm(path, data):
    """Write a 1- or 3-channel float image as little-endian PFM."""
    a = np.asarray(data, dtype="<f4")
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[..., 0]
    if a.ndim == 2:
        tag = b"Pf"
    elif a.ndim == 3 and a.shape[2] == 3:
        tag = b"PF"
    else:
        raise ValueError(f"cannot store shape {a.shape} as PFM")
    h, w = a.shape[:2]
    with open(path, "wb") as fh:
        fh.write(tag + b"\n%d %d\n-1.0\n" % (w, h))
        # PFM stores rows bottom-to-top
        fh.write(np.ascontiguousarray(a[::-1]).tobytes())


def read_pfm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        tag, dims, scale, body = raw.split(b"\n", 3)
        tag = tag.strip()
        w, h = (int(v) for v in dims.split())
        scale = float(scale)
    except ValueError as exc:
        raise MalformedPfm(f"{path}: bad header") from exc
    if tag == b"Pf":
        chans = 1
    elif tag == b"PF":
        chans = 3
    else:
        raise MalformedPfm(f"{path}: unknown tag {tag!r}")
    if w <= 0 or h <= 0 or scale == 0:
        raise MalformedPfm(f"{path}: bad header values")
    n = w * h * chans
    if len(body) != 4 * n:
        raise MalformedPfm(f"{path}: expected {4 * n} data bytes, found {len(body)}")
    dtype = "<f4" if scale < 0 else ">f4"
    a = np.frombuffer(body, dtype=dtype).reshape((h, w, chans) if chans == 3 else (h, w))
    return a[::-1].astype(np.float32)


def save_depthmap(dm: DepthMap, path):
    """Store as float32 PFM; non-defined entries become NaN."""
    write_pfm(path, np.where(dm.mask, dm.values, np.nan))


def load_depthmap(path) -> DepthMap:
    a = read_pfm(path)
    if a.ndim != 2:
        raise MalformedPfm(f"{path}: depth maps must be single-channel")
    return DepthMap(a.astype(np.float64))


def save_coherence(cm: CoherenceMap, path):
    write_pfm(path, cm.values)


def load_coherence(path) -> CoherenceMap:
    a = read_pfm(path)
    if a.ndim != 2:
        raise MalformedPfm(f"{path}: coherence maps must be single-channel")
    return CoherenceMap(np.clip(a.astype(np.float64), 0.0, 1.0))
