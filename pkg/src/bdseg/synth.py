"""Synthetic speckled-blob images with ground-truth masks.

Each sample is a perturbed ellipse

    r(t) = r0(t) * (1 + sum_{k=2..4} a_k cos(k t + phase_k))

drawn over a textured background, with a linear intensity ramp across the
interior, a bright band along the boundary and multiplicative speckle
``(1 + sigma * u)``, ``u ~ U[-1, 1]``. A sample is a pure function of
``(params.seed, index)``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields

import numpy as np

from . import raster
from .errors import DomainError
from .raster import LabeledImage
from .rng import Stream


@dataclass
class ShapeParams:
    size: int = 64
    # the pixel-valued fields below default to fractions of ``size``
    center_jitter: float | None = None
    semi_axis_min: float | None = None
    semi_axis_max: float | None = None
    rotation_max: float = math.pi
    perturbation: float = 0.15
    interior_gradient: float = 40.0
    speckle: float = 0.3
    background_texture: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if self.center_jitter is None:
            self.center_jitter = 0.08 * self.size
        if self.semi_axis_min is None:
            self.semi_axis_min = max(4.0, 0.16 * self.size)
        if self.semi_axis_max is None:
            self.semi_axis_max = 0.30 * self.size
        self.validate()

    def validate(self):
        if self.size < 8:
            raise DomainError(f"image size {self.size} too small")
        if not 0 <= self.perturbation < 0.3:
            raise DomainError("perturbation amplitude must lie in [0, 0.3)")
        if self.semi_axis_min < 4:
            raise DomainError("semi-axes must be at least 4 pixels")
        if self.semi_axis_max < self.semi_axis_min:
            raise DomainError("semi_axis_max < semi_axis_min")
        if self.speckle < 0 or self.speckle >= 1:
            raise DomainError("speckle strength must lie in [0, 1)")

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]


@dataclass
class ShapeGeometry:
    cx: float
    cy: float
    semi_major: float
    semi_minor: float
    angle: float
    amps: np.ndarray
    phases: np.ndarray

    def radius(self, theta):
        t = theta - self.angle
        a, b = self.semi_major, self.semi_minor
        r0 = a * b / np.sqrt((b * np.cos(t)) ** 2 + (a * np.sin(t)) ** 2)
        k = np.arange(2, 5)
        wobble = np.cos(np.asarray(theta)[..., None] * k + self.phases)
        return r0 * (1.0 + (self.amps * wobble).sum(axis=-1))


def _geometry(params: ShapeParams, rs: Stream) -> ShapeGeometry:
    size = params.size
    c = (size - 1) / 2.0
    cx = c + rs.uniform(-params.center_jitter, params.center_jitter)
    cy = c + rs.uniform(-params.center_jitter, params.center_jitter)
    a = rs.uniform(params.semi_axis_min, params.semi_axis_max)
    b = rs.uniform(params.semi_axis_min, a)
    angle = rs.uniform(0.0, params.rotation_max)
    amps = rs.uniform(0.0, params.perturbation / 3.0, size=3)
    phases = rs.uniform(0.0, 2 * math.pi, size=3)
    return ShapeGeometry(cx, cy, a, b, angle, amps, phases)


def _render(params: ShapeParams, index: int):
    """Return (noiseless intensity, speckle field, mask, geometry)."""
    rs = Stream(params.seed, index, salt=0x5EED)
    size = params.size
    geo = _geometry(params, rs)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    dx, dy = xs - geo.cx, ys - geo.cy
    rho = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    r = geo.radius(theta)
    mask = rho <= r

    # smooth background: a few random low-frequency plane waves
    bg = np.full((size, size), 100.0)
    for _ in range(4):
        fx, fy = rs.uniform(-3, 3), rs.uniform(-3, 3)
        ph = rs.uniform(0, 2 * math.pi)
        amp = rs.uniform(0.3, 1.0) * params.background_texture / 2
        bg += amp * np.cos(2 * math.pi * (fx * xs + fy * ys) / size + ph)

    g_dir = rs.uniform(0, 2 * math.pi)
    ramp = (dx * math.cos(g_dir) + dy * math.sin(g_dir)) / max(geo.semi_major, 1.0)
    interior = 60.0 + 0.5 * params.interior_gradient * np.clip(ramp, -1, 1)
    band_width = max(1.0, 0.03 * size)
    band = 90.0 * np.exp(-((rho - r) / band_width) ** 2)

    clean = np.where(mask, interior, bg) + band
    speckle = 1.0 + params.speckle * rs.uniform(-1.0, 1.0, size=(size, size))
    return clean, speckle, mask, geo


def gen_shape(params: ShapeParams, index: int) -> LabeledImage:
    clean, speckle, mask, _ = _render(params, index)
    image = raster.rescale_intensity(np.maximum(clean * speckle, 0.0))
    return LabeledImage(image, mask, name=f"s{index:05d}")


def gen_dataset(n: int, params: ShapeParams, start: int = 0) -> list[LabeledImage]:
    if n < 1:
        raise DomainError(f"dataset size must be >= 1, got {n}")
    return [gen_shape(params, start + i) for i in range(n)]


def write_dataset(items, out_dir) -> str:
    """Write ``<name>.pgm`` / ``<name>_mask.pgm`` pairs and ``manifest.txt``."""
    raster.ensure_dir(out_dir)
    lines = []
    for item in items:
        img_name = f"{item.name}.pgm"
        mask_name = f"{item.name}_mask.pgm"
        raster.save_pgm(item.image, os.path.join(out_dir, img_name))
        raster.save_mask(item.mask, os.path.join(out_dir, mask_name))
        lines.append(f"{img_name} {mask_name}\n")
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w") as fh:
        fh.writelines(lines)
    return manifest


def read_manifest(path) -> list[LabeledImage]:
    """Load image/mask pairs from a manifest (paths relative to its folder)."""
    base = os.path.dirname(os.path.abspath(path))
    items = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DomainError(f"{path}:{lineno}: expected '<image> <mask>'")
            img_path, mask_path = (p if os.path.isabs(p) else os.path.join(base, p) for p in parts)
            name = os.path.splitext(os.path.basename(img_path))[0]
            items.append(LabeledImage(raster.load_pgm(img_path), raster.load_mask(mask_path), name))
    return items
