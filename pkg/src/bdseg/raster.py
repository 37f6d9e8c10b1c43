"""Gray images, binary masks and PGM file I/O.

Images are plain 2-D ``float64`` arrays indexed ``[row, col]`` (``[y, x]``)
with a nominal range of [0, 255]; masks are 2-D ``bool`` arrays.
"""
from __future__ import annotations

import os

import numpy as np

from .errors import DomainError, ParseError

_WHITESPACE = b" \t\r\n\v\f"


def as_image(data, width=None, height=None) -> np.ndarray:
    """Build a gray image from a nested sequence or a flat row-major list."""
    arr = np.asarray(data, dtype=np.float64)
    if width is not None and height is not None:
        if arr.size != width * height:
            raise DomainError(f"data length {arr.size} != {width}x{height}")
        arr = arr.reshape(height, width)
    if arr.ndim != 2:
        raise DomainError(f"expected a 2-D image, got shape {arr.shape}")
    return arr


def as_mask(data, width=None, height=None) -> np.ndarray:
    arr = np.asarray(data).astype(bool)
    if width is not None and height is not None:
        if arr.size != width * height:
            raise DomainError(f"data length {arr.size} != {width}x{height}")
        arr = arr.reshape(height, width)
    if arr.ndim != 2:
        raise DomainError(f"expected a 2-D mask, got shape {arr.shape}")
    return arr


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    if pos >= n:
        raise ParseError(f"unexpected end of header at byte {pos}")
    start = pos
    while pos < n and buf[pos:pos + 1] not in _WHITESPACE and buf[pos:pos + 1] != b"#":
        pos += 1
    return buf[start:pos], pos


def _read_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    start = pos
    tok, pos = _read_token(buf, pos)
    if not tok.isdigit():
        raise ParseError(f"bad {what} {tok!r} near byte {start}")
    return int(tok), pos


def parse_pgm(buf: bytes) -> np.ndarray:
    if len(buf) < 2:
        raise ParseError("empty or truncated file at byte 0")
    magic = buf[:2]
    if magic not in (b"P2", b"P5"):
        raise ParseError(f"bad magic {magic!r} at byte 0")
    pos = 2
    width, pos = _read_int(buf, pos, "width")
    height, pos = _read_int(buf, pos, "height")
    maxval_at = pos
    maxval, pos = _read_int(buf, pos, "maxval")
    if width < 1 or height < 1:
        raise ParseError(f"non-positive dimensions {width}x{height} before byte {maxval_at}")
    if maxval < 1 or maxval > 255:
        raise ParseError(f"maxval {maxval} unsupported (must be 1..255) near byte {maxval_at}")
    count = width * height
    if magic == b"P5":
        if pos >= len(buf) or buf[pos:pos + 1] not in _WHITESPACE:
            raise ParseError(f"missing separator after maxval at byte {pos}")
        pos += 1
        payload = buf[pos:pos + count]
        if len(payload) < count:
            raise ParseError(
                f"truncated payload at byte {pos + len(payload)}: "
                f"expected {count} bytes, got {len(payload)}")
        values = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        values = np.empty(count, dtype=np.float64)
        for i in range(count):
            try:
                tok_at = pos
                v, pos = _read_int(buf, pos, "sample")
            except ParseError as exc:
                raise ParseError(f"truncated payload: sample {i} of {count}; {exc}") from None
            if v > maxval:
                raise ParseError(f"sample {v} exceeds maxval {maxval} at byte {tok_at}")
            values[i] = v
    if values.size and values.max() > maxval:
        bad = int(np.argmax(values > maxval))
        raise ParseError(f"sample exceeds maxval {maxval} at byte {pos + bad}")
    return values.reshape(height, width)


def load_pgm(path) -> np.ndarray:
    """Read a P2 or P5 PGM (maxval <= 255); sample values are kept as-is."""
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def encode_pgm(img: np.ndarray) -> bytes:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise DomainError(f"cannot write empty or non-2-D image of shape {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 255:
        raise DomainError("image values must lie in [0, 255]")
    h, w = img.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + np.rint(img).astype(np.uint8).tobytes()


def save_pgm(img: np.ndarray, path) -> None:
    """Write a binary P5 PGM. Non-integer values are rounded to nearest."""
    data = encode_pgm(img)
    with open(path, "wb") as fh:
        fh.write(data)


def load_mask(path) -> np.ndarray:
    return load_pgm(path) > 0


def save_mask(mask: np.ndarray, path) -> None:
    save_pgm(np.where(np.asarray(mask, dtype=bool), 255.0, 0.0), path)


def rescale_intensity(img: np.ndarray) -> np.ndarray:
    """Linear map of [min, max] onto [0, 255]; a constant image maps to zeros."""
    img = np.asarray(img, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if hi <= lo:
        return np.zeros_like(img)
    # dividing first makes the maximum exactly 1 (x / x == 1 in IEEE arithmetic)
    return (img - lo) / (hi - lo) * 255.0


def _bilinear(img: np.ndarray, h: int, w: int) -> np.ndarray:
    ih, iw = img.shape
    # pixel-centre alignment, edge samples clamped
    ys = np.clip((np.arange(h) + 0.5) * (ih / h) - 0.5, 0, ih - 1)
    xs = np.clip((np.arange(w) + 0.5) * (iw / w) - 0.5, 0, iw - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, ih - 1)
    x1 = np.minimum(x0 + 1, iw - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def _nearest(arr: np.ndarray, h: int, w: int) -> np.ndarray:
    ih, iw = arr.shape
    ys = np.minimum(((np.arange(h) + 0.5) * (ih / h)).astype(int), ih - 1)
    xs = np.minimum(((np.arange(w) + 0.5) * (iw / w)).astype(int), iw - 1)
    return arr[ys][:, xs]


def resize(arr: np.ndarray, w: int, h: int) -> np.ndarray:
    """Resize to ``w`` x ``h``: bilinear for images, nearest for bool masks."""
    if w < 1 or h < 1:
        raise DomainError(f"target size must be positive, got {w}x{h}")
    arr = np.asarray(arr)
    if arr.shape == (h, w):
        return arr.copy()
    if arr.dtype == bool:
        return _nearest(arr, h, w)
    return _bilinear(arr.astype(np.float64), h, w)


def flip_horizontal(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(arr)[:, ::-1])


def normalize_image(img: np.ndarray, size: int) -> np.ndarray:
    """Resize to ``size`` x ``size`` then stretch intensities to [0, 255]."""
    return rescale_intensity(resize(np.asarray(img, dtype=np.float64), size, size))


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)


class LabeledImage:
    """An image with its segmentation mask (same dimensions)."""

    __slots__ = ("image", "mask", "name")

    def __init__(self, image, mask, name=""):
        image = np.asarray(image, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        if image.shape != mask.shape:
            raise DomainError(f"image {image.shape} and mask {mask.shape} differ in size")
        self.image = image
        self.mask = mask
        self.name = name

    def __iter__(self):
        yield self.image
        yield self.mask

    def __repr__(self):
        h, w = self.image.shape
        return f"LabeledImage({self.name!r}, {w}x{h}, fg={int(self.mask.sum())})"
