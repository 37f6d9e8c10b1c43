"""Boundary distance maps: ``d(p) = exp(-lambda * D(p))`` where ``D`` is the
Euclidean distance from pixel ``p`` to the nearest boundary pixel.

Contours are ``(k, 2)`` integer arrays of ``(x, y)`` pixel coordinates.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DomainError, ParseError

DMAP_MAGIC = b"DMAP"
_DMAP_HEADER = struct.Struct("<4sIIf")


@dataclass
class DistanceMap:
    values: np.ndarray
    lam: float

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def threshold(self) -> float:
        return math.exp(-self.lam)


def boundary_of_mask(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with a 4-neighbour in the background.

    Pixels outside the image count as background, so foreground touching the
    border is always boundary.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DomainError("mask has no foreground pixels")
    padded = np.pad(mask, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    ys, xs = np.nonzero(mask & ~interior)
    return np.stack([xs, ys], axis=1)


def contour_mask(contour: np.ndarray, w: int, h: int) -> np.ndarray:
    contour = np.asarray(contour, dtype=int).reshape(-1, 2)
    if contour.size == 0:
        raise DomainError("contour is empty")
    xs, ys = contour[:, 0], contour[:, 1]
    if xs.min() < 0 or ys.min() < 0 or xs.max() >= w or ys.max() >= h:
        raise DomainError("contour point outside the image")
    out = np.zeros((h, w), dtype=bool)
    out[ys, xs] = True
    return out


def min_boundary_distance(p, contour) -> float:
    """Exact minimum Euclidean distance from ``p`` to any contour point, by scan."""
    contour = np.asarray(contour, dtype=np.float64).reshape(-1, 2)
    if contour.size == 0:
        raise DomainError("contour is empty")
    dx = contour[:, 0] - p[0]
    dy = contour[:, 1] - p[1]
    return float(np.sqrt(dx * dx + dy * dy).min())


def exhaustive_distance_field(contour, w: int, h: int) -> np.ndarray:
    """Distance to the contour for every pixel by brute-force scan (reference)."""
    contour = np.asarray(contour, dtype=np.float64).reshape(-1, 2)
    if contour.size == 0:
        raise DomainError("contour is empty")
    out = np.empty(h * w)
    gy, gx = np.mgrid[0:h, 0:w]
    px = gx.ravel().astype(np.float64)
    py = gy.ravel().astype(np.float64)
    step = max(1, 2_000_000 // len(contour))
    for s in range(0, h * w, step):
        dx = px[s:s + step, None] - contour[None, :, 0]
        dy = py[s:s + step, None] - contour[None, :, 1]
        out[s:s + step] = np.sqrt(dx * dx + dy * dy).min(axis=1)
    return out.reshape(h, w)


def distance_field(contour, w: int, h: int) -> np.ndarray:
    """Exact Euclidean distance transform to the contour pixels."""
    on = contour_mask(contour, w, h)
    return ndimage.distance_transform_edt(~on)


def encode_distance_map(contour, w: int, h: int, lam: float = 1.0) -> DistanceMap:
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    dist = distance_field(contour, w, h)
    return DistanceMap(np.exp(-lam * dist), float(lam))


def encode_mask(mask: np.ndarray, lam: float = 1.0) -> DistanceMap:
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    return encode_distance_map(boundary_of_mask(mask), w, h, lam)


DECODE_SLACK = 1.0 + 1e-9


def decode_boundary(pred: DistanceMap) -> np.ndarray:
    """Boundary pixels: value >= exp(-lambda), i.e. implied distance <= 1.

    The threshold sits at distance 1 + 1e-9: vectorised and scalar ``exp``
    can differ by an ulp, and the next grid distance above 1 is sqrt(2).
    """
    if not pred.lam > 0:
        raise DomainError(f"lambda must be positive, got {pred.lam}")
    return np.asarray(pred.values) >= math.exp(-pred.lam * DECODE_SLACK)


def _f32_lambda(raw: float) -> float:
    # lambda is stored as float32; recover the short decimal it came from
    return float(f"{raw:.7g}")


def encode_dmap(dmap: DistanceMap) -> bytes:
    values = np.asarray(dmap.values, dtype="<f8")
    h, w = values.shape
    return _DMAP_HEADER.pack(DMAP_MAGIC, w, h, dmap.lam) + values.tobytes()


def parse_dmap(buf: bytes) -> DistanceMap:
    if len(buf) < _DMAP_HEADER.size:
        raise ParseError(f"truncated DMAP header at byte {len(buf)}")
    magic, w, h, lam = _DMAP_HEADER.unpack_from(buf, 0)
    if magic != DMAP_MAGIC:
        raise ParseError(f"bad DMAP magic {magic!r} at byte 0")
    need = _DMAP_HEADER.size + 8 * w * h
    if len(buf) != need:
        raise ParseError(f"DMAP payload size mismatch at byte {len(buf)}: expected {need} bytes total")
    values = np.frombuffer(buf, dtype="<f8", offset=_DMAP_HEADER.size).reshape(h, w)
    return DistanceMap(values.astype(np.float64), _f32_lambda(lam))


def save_dmap(dmap: DistanceMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_dmap(dmap))


def load_dmap(path) -> DistanceMap:
    with open(path, "rb") as fh:
        return parse_dmap(fh.read())


def heatmap(dmap: DistanceMap) -> np.ndarray:
    """Gray image ``round(255 * d)`` for viewing."""
    return np.rint(255.0 * np.clip(dmap.values, 0.0, 1.0))
