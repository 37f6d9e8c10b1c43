"""Batched convolution, transposed convolution and pointwise layers.

Activations are ``(batch, channels, height, width)`` float64 arrays. Every
``*_forward`` returns ``(out, cache)`` and the matching ``*_backward`` takes
``(dout, cache)``.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


def im2col(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    """``(B, C, H, W)`` -> ``(B, C*k*k, Ho*Wo)`` patch matrix."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    cols = np.empty((b, c, k, k, ho, wo), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
    return cols.reshape(b, c * k * k, ho * wo)


def col2im(cols: np.ndarray, shape, k: int, stride: int, pad: int) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add patches back to ``shape``."""
    b, c, h, w = shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    cols = cols.reshape(b, c, k, k, ho, wo)
    out = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    if pad:
        out = out[:, :, pad:pad + h, pad:pad + w]
    return out


def _check_conv(x, w, b):
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"expected 4-D input and filter, got {x.shape} and {w.shape}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"bias shape {b.shape} does not match {w.shape[0]} filters")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"input has {x.shape[1]} channels, filter expects {w.shape[1]}")
    if w.shape[2] != w.shape[3] or w.shape[2] % 2 == 0:
        raise ShapeError(f"filters must be square with odd size, got {w.shape[2:]}")


def conv_forward(x, w, b, stride=1):
    """Zero-padded ("same") cross-correlation. ``w`` is ``(out, in, k, k)``.

    Stride 1 keeps the spatial size; stride 2 halves even sizes.
    """
    _check_conv(x, w, b)
    if stride == 2 and (x.shape[2] % 2 or x.shape[3] % 2):
        raise ShapeError(f"stride-2 convolution needs even sizes, got {x.shape[2:]}")
    o, c, k, _ = w.shape
    pad = k // 2
    bsz, _, h, wd = x.shape
    cols = im2col(x, k, stride, pad)
    out = np.matmul(w.reshape(o, -1), cols) + b[None, :, None]
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    return out.reshape(bsz, o, ho, wo), (x.shape, cols, w, stride)


def conv_backward(dout, cache):
    x_shape, cols, w, stride = cache
    o, c, k, _ = w.shape
    bsz = dout.shape[0]
    d2 = dout.reshape(bsz, o, -1)
    dw = np.tensordot(d2, cols, axes=([0, 2], [0, 2])).reshape(w.shape)
    db = d2.sum(axis=(0, 2))
    dcols = np.matmul(w.reshape(o, -1).T, d2)
    dx = col2im(dcols, x_shape, k, stride, k // 2)
    return dx, dw, db


def deconv_forward(x, w, b):
    """Stride-2 transposed convolution that exactly doubles height and width.

    ``w`` is ``(in, out, k, k)``. This is the adjoint of a stride-2 "same"
    convolution with the same filter, plus a per-channel bias.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"expected 4-D input and filter, got {x.shape} and {w.shape}")
    cin, cout, k, k2 = w.shape
    if x.shape[1] != cin:
        raise ShapeError(f"input has {x.shape[1]} channels, filter expects {cin}")
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"filters must be square with odd size, got {w.shape[2:]}")
    if b.shape != (cout,):
        raise ShapeError(f"bias shape {b.shape} does not match {cout} outputs")
    bsz, _, h, wd = x.shape
    wm = w.reshape(cin, cout * k * k)
    cols = np.matmul(wm.T, x.reshape(bsz, cin, h * wd))
    out_shape = (bsz, cout, 2 * h, 2 * wd)
    out = col2im(cols, out_shape, k, 2, k // 2) + b[None, :, None, None]
    return out, (x, w)


def deconv_backward(dout, cache):
    x, w = cache
    cin, cout, k, _ = w.shape
    bsz, _, h, wd = x.shape
    dcols = im2col(dout, k, 2, k // 2)  # (B, cout*k*k, h*wd)
    xm = x.reshape(bsz, cin, h * wd)
    dx = np.matmul(w.reshape(cin, -1), dcols).reshape(x.shape)
    dw = np.tensordot(xm, dcols, axes=([0, 2], [0, 2])).reshape(w.shape)
    db = dout.sum(axis=(0, 2, 3))
    return dx, dw, db


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dout, cache):
    return dout * cache


SIGMOID_FLOOR = 1e-12


def sigmoid_forward(z):
    """Logistic function clamped below at 1e-12 so outputs lie in (0, 1]."""
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    clamped = out < SIGMOID_FLOOR
    out[clamped] = SIGMOID_FLOOR
    return out, (out, clamped)


def sigmoid_backward(dout, cache):
    out, clamped = cache
    g = dout * out * (1.0 - out)
    g[clamped] = 0.0
    return g


def softmax2(logits):
    """Per-pixel softmax over the channel axis of ``(B, 2, H, W)`` logits."""
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=1, keepdims=True)
