"""Boundary-distance regression net and pixel classification net.

Both networks are flat sequences of :class:`LayerSpec`. Parameters live in a
single ordered dict keyed ``"<layer>.w"`` / ``"<layer>.b"``.

Boundary net (input ``(B, 1, H, W)``, ``H`` and ``W`` divisible by 8)::

    3 x [conv stride 2 + ReLU]      encoder, down to H/8
    2 x [conv + ReLU]               projection, produces S_0
    3 x [deconv x2 + ReLU]          S_i = max(0, W_i (x) S_{i-1} + B_i)
    1x1 conv + sigmoid              distance map in (0, 1]

Pixel net (input: the distance map copied to 3 channels)::

    3 x [conv + ReLU] -> 1x1 conv -> 2-way softmax
"""
from __future__ import annotations

import struct
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, ParseError, ShapeError
from . import layers as L

KINDS = ("conv-stride2", "conv", "deconv-x2", "relu", "sigmoid", "softmax2")
PARAM_KINDS = ("conv-stride2", "conv", "deconv-x2")


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    in_ch: int = 0
    out_ch: int = 0
    filter: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown layer kind {self.kind!r}")
        if self.kind in PARAM_KINDS and self.filter % 2 == 0:
            raise DomainError(f"layer {self.name}: filter size must be odd")

    @property
    def has_params(self) -> bool:
        return self.kind in PARAM_KINDS

    def weight_shape(self):
        if self.kind == "deconv-x2":
            return (self.in_ch, self.out_ch, self.filter, self.filter)
        return (self.out_ch, self.in_ch, self.filter, self.filter)


@dataclass(frozen=True)
class Architecture:
    encoder: tuple = (8, 16, 32)
    projection: int = 48
    deconv_in: tuple = (48, 24, 12)
    deconv_out: int = 6
    pixel: int = 4
    enc_filter: int = 3
    deconv_filter: int = 5
    pixel_filter: int = 3

    def boundary_specs(self) -> list[LayerSpec]:
        specs = []
        c_in = 1
        for i, c in enumerate(self.encoder, 1):
            specs += [LayerSpec(f"enc{i}", "conv-stride2", c_in, c, self.enc_filter),
                      LayerSpec(f"enc{i}_relu", "relu")]
            c_in = c
        specs += [LayerSpec("proj1", "conv", c_in, self.projection, 3), LayerSpec("proj1_relu", "relu"),
                  LayerSpec("proj2", "conv", self.projection, self.deconv_in[0], 3),
                  LayerSpec("proj2_relu", "relu")]
        outs = list(self.deconv_in[1:]) + [self.deconv_out]
        for i, (ci, co) in enumerate(zip(self.deconv_in, outs), 1):
            specs += [LayerSpec(f"dec{i}", "deconv-x2", ci, co, self.deconv_filter),
                      LayerSpec(f"dec{i}_relu", "relu")]
        specs += [LayerSpec("head", "conv", self.deconv_out, 1, 1), LayerSpec("head_sigmoid", "sigmoid")]
        return specs

    def pixel_specs(self) -> list[LayerSpec]:
        c, f = self.pixel, self.pixel_filter
        return [LayerSpec("pix1", "conv", 3, c, f), LayerSpec("pix1_relu", "relu"),
                LayerSpec("pix2", "conv", c, c, f), LayerSpec("pix2_relu", "relu"),
                LayerSpec("pix3", "conv", c, c, f), LayerSpec("pix3_relu", "relu"),
                LayerSpec("cls", "conv", c, 2, 1), LayerSpec("cls_softmax", "softmax2")]


def init_params(specs, seed: int, scheme: str = "paper", std: float = 0.001):
    """Filters ~ N(0, std) ("paper"), Glorot-uniform ("xavier") or He-normal ("he"); biases 0.

    ``scheme`` may also be a callable ``spec -> str`` choosing per layer.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    params = OrderedDict()
    for spec in specs:
        if not spec.has_params:
            continue
        shape = spec.weight_shape()
        which = scheme(spec) if callable(scheme) else scheme
        if which == "paper":
            w = rng.normal(0.0, std, size=shape)
        elif which == "xavier":
            rf = spec.filter * spec.filter
            limit = np.sqrt(6.0 / (spec.in_ch * rf + spec.out_ch * rf))
            w = rng.uniform(-limit, limit, size=shape)
        elif which == "he":
            # a stride-2 transposed conv feeds each output from ~k^2/4 taps per channel
            taps = spec.filter * spec.filter / (4.0 if spec.kind == "deconv-x2" else 1.0)
            w = rng.normal(0.0, np.sqrt(2.0 / (spec.in_ch * taps)), size=shape)
        else:
            raise DomainError(f"unknown init scheme {which!r}")
        params[f"{spec.name}.w"] = w
        params[f"{spec.name}.b"] = np.zeros(spec.out_ch)
    return params


def run_forward(specs, params, x):
    """Apply a layer sequence; returns the output and per-layer caches."""
    caches = []
    for spec in specs:
        k = spec.kind
        if k == "conv-stride2" or k == "conv":
            x, c = L.conv_forward(x, params[f"{spec.name}.w"], params[f"{spec.name}.b"],
                                  2 if k == "conv-stride2" else 1)
        elif k == "deconv-x2":
            x, c = L.deconv_forward(x, params[f"{spec.name}.w"], params[f"{spec.name}.b"])
        elif k == "relu":
            x, c = L.relu_forward(x)
        elif k == "sigmoid":
            x, c = L.sigmoid_forward(x)
        else:  # softmax2 output is consumed with the cross-entropy gradient
            x, c = L.softmax2(x), None
        caches.append(c)
    return x, caches


def run_backward(specs, caches, dout, grads):
    """Backpropagate ``dout`` and accumulate parameter gradients into ``grads``.

    A trailing softmax layer is skipped: ``dout`` must already be the gradient
    with respect to its logits.
    """
    for spec, c in zip(reversed(specs), reversed(caches)):
        k = spec.kind
        if k in ("conv-stride2", "conv"):
            dout, dw, db = L.conv_backward(dout, c)
        elif k == "deconv-x2":
            dout, dw, db = L.deconv_backward(dout, c)
        elif k == "relu":
            dout = L.relu_backward(dout, c)
            continue
        elif k == "sigmoid":
            dout = L.sigmoid_backward(dout, c)
            continue
        else:
            continue
        grads[f"{spec.name}.w"] += dw
        grads[f"{spec.name}.b"] += db
    return dout


def image_to_input(images) -> np.ndarray:
    """Gray images in [0, 255] -> ``(B, 1, H, W)`` network input in [-1, 1]."""
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    return ((x - 127.5) / 127.5)[:, None]


class SegNet:
    """The boundary net followed by the pixel net, sharing one parameter dict."""

    def __init__(self, arch: Architecture | None = None, params=None, seed: int = 0,
                 init: str = "paper"):
        self.arch = arch or Architecture()
        self.boundary_specs = self.arch.boundary_specs()
        self.pixel_specs = self.arch.pixel_specs()
        if params is None:
            params = init_params(self.boundary_specs + self.pixel_specs, seed, init_scheme(init))
        self.params = params

    @property
    def specs(self):
        return self.boundary_specs + self.pixel_specs

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def boundary_forward(self, x):
        h, w = x.shape[2:]
        if h % 8 or w % 8:
            raise ShapeError(f"input size {w}x{h} is not divisible by 8")
        return run_forward(self.boundary_specs, self.params, x)

    def pixel_forward(self, dmap):
        """``dmap`` is ``(B, 1, H, W)``; returns class probabilities ``(B, 2, H, W)``."""
        x3 = np.repeat(dmap, 3, axis=1)
        return run_forward(self.pixel_specs, self.params, x3)

    def forward(self, x):
        phi, bc = self.boundary_forward(x)
        probs, pc = self.pixel_forward(phi)
        return phi, probs, (bc, pc)

    def pixel_mask(self, phi, rows: int = 32):
        """Inference-only pixel net on one ``(H, W)`` map -> argmax mask.

        Same arithmetic as :meth:`pixel_forward` but run through all layers
        one strip of ``rows`` output rows at a time, so the patch matrices stay
        in cache. The three identical input channels are folded into one by
        summing the first filter over its input axis, and the softmax is
        skipped: class 1 wins where its logit is larger.
        """
        specs = [s for s in self.pixel_specs if s.kind == "conv"]
        *hidden, cls = specs
        h, w = phi.shape
        pad = [s.filter // 2 for s in hidden]
        halo = sum(pad)
        weights = []
        for i, s in enumerate(hidden):
            wt = self.params[f"{s.name}.w"]
            if i == 0:
                wt = wt.sum(axis=1, keepdims=True)
            weights.append((wt.reshape(wt.shape[0], -1), self.params[f"{s.name}.b"][:, None]))
        wc = self.params[f"{cls.name}.w"][:, :, 0, 0]
        bc = self.params[f"{cls.name}.b"][:, None, None]
        src = np.zeros((1, h + 2 * halo, w + 2 * pad[0]))
        src[0, halo:halo + h, pad[0]:pad[0] + w] = phi
        out = np.empty((h, w), dtype=bool)
        for r0 in range(0, h, rows):
            r1 = min(h, r0 + rows)
            a = src[:, r0:r1 + 2 * halo]
            top = r0 - halo  # image row of a's first row
            for i, (p, (wm, b)) in enumerate(zip(pad, weights)):
                n = a.shape[1] - 2 * p
                z = wm @ L.im2col(a[None], 2 * p + 1, 1, 0)[0]
                z += b
                np.maximum(z, 0.0, out=z)
                z = z.reshape(-1, n, w)
                top += p
                if i + 1 < len(pad):
                    # rows outside the image are the next layer's zero padding
                    q = pad[i + 1]
                    lo, hi = max(0, -top), min(n, h - top)
                    a = np.zeros((z.shape[0], n, w + 2 * q))
                    a[:, lo:hi, q:q + w] = z[:, lo:hi]
                else:
                    a = z
            logits = np.tensordot(wc, a, axes=(1, 0)) + bc
            out[r0:r1] = logits[1] > logits[0]
        return out

    def backward(self, caches, d_phi, d_logits):
        """Gradients of a loss given its derivatives w.r.t. phi and the logits."""
        bc, pc = caches
        grads = OrderedDict((k, np.zeros_like(v)) for k, v in self.params.items())
        if d_logits is not None:
            dx3 = run_backward(self.pixel_specs, pc, d_logits, grads)
            d_phi = d_phi + dx3.sum(axis=1, keepdims=True)
        run_backward(self.boundary_specs, bc, d_phi, grads)
        return grads

    # --- persistence -------------------------------------------------------

    def to_bytes(self) -> bytes:
        return encode_bnet(self.arch, self.params)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "SegNet":
        arch, params = parse_bnet(buf)
        return cls(arch, params)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "SegNet":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def init_scheme(name: str):
    """Named init policy.

    ``"paper"``: every filter N(0, 0.001). ``"xavier"``: every filter
    Glorot-uniform. ``"he"``: N(0, 2 / fan_in) for filters feeding a ReLU,
    counting only the taps that reach one output, Glorot for the sigmoid
    and softmax heads. ``"hybrid"``: Glorot-uniform for the encoder and
    pixel net (the layers that would otherwise come from a pretrained
    backbone), N(0, 0.001) for the projection and deconvolution layers.
    """
    if name in ("paper", "xavier"):
        return name
    if name == "he":
        return lambda spec: "xavier" if spec.name in ("head", "cls") else "he"
    if name == "hybrid":
        return lambda spec: "xavier" if spec.name.startswith(("enc", "pix", "cls")) else "paper"
    raise DomainError(f"unknown init scheme {name!r}")


# --- BNET file format ---------------------------------------------------------
#
#   "BNET" | u32 version | u32 n_arch_fields | n x i32 arch fields
#   | u32 n_tensors | per tensor: u16 name_len, name, u8 ndim, ndim x u32 dims
#   | all tensor data, little-endian f64, in table order

BNET_MAGIC = b"BNET"
BNET_VERSION = 1


def _arch_fields(arch: Architecture):
    return [len(arch.encoder), *arch.encoder, arch.projection, len(arch.deconv_in), *arch.deconv_in,
            arch.deconv_out, arch.pixel, arch.enc_filter, arch.deconv_filter, arch.pixel_filter]


def _arch_from_fields(vals) -> Architecture:
    it = iter(vals)
    ne = next(it)
    enc = tuple(next(it) for _ in range(ne))
    proj = next(it)
    nd = next(it)
    dec = tuple(next(it) for _ in range(nd))
    return Architecture(enc, proj, dec, *it)


def encode_bnet(arch: Architecture, params) -> bytes:
    fields = _arch_fields(arch)
    out = [BNET_MAGIC, struct.pack("<II", BNET_VERSION, len(fields)),
           struct.pack(f"<{len(fields)}i", *fields), struct.pack("<I", len(params))]
    for name, arr in params.items():
        nb = name.encode("utf-8")
        out.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim)
                   + struct.pack(f"<{arr.ndim}I", *arr.shape))
    for arr in params.values():
        out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(out)


def parse_bnet(buf: bytes):
    try:
        if buf[:4] != BNET_MAGIC:
            raise ParseError(f"bad BNET magic {buf[:4]!r} at byte 0")
        version, nf = struct.unpack_from("<II", buf, 4)
        if version != BNET_VERSION:
            raise ParseError(f"unsupported BNET version {version} at byte 4")
        pos = 12
        fields = struct.unpack_from(f"<{nf}i", buf, pos)
        pos += 4 * nf
        (nt,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        table = []
        for _ in range(nt):
            (ln,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos:pos + ln].decode("utf-8")
            pos += ln
            (nd,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            shape = struct.unpack_from(f"<{nd}I", buf, pos)
            pos += 4 * nd
            table.append((name, shape))
        params = OrderedDict()
        for name, shape in table:
            n = int(np.prod(shape))
            if pos + 8 * n > len(buf):
                raise ParseError(f"truncated tensor {name!r} at byte {pos}")
            params[name] = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).reshape(shape).copy()
            pos += 8 * n
        if pos != len(buf):
            raise ParseError(f"trailing data at byte {pos}")
    except struct.error as exc:
        raise ParseError(f"truncated BNET file: {exc}") from None
    arch = _arch_from_fields(fields)
    expected = init_params(arch.boundary_specs() + arch.pixel_specs(), 0)
    for k, v in expected.items():
        if k not in params or params[k].shape != v.shape:
            raise ParseError(f"BNET tensor {k!r} missing or misshapen")
    return arch, params
