"""Mini-batch training of the two networks under the annealed multi-loss."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .. import distance_map as dm
from ..errors import DomainError
from ..rng import Stream
from . import losses
from .model import Architecture, SegNet, image_to_input
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    steps: int = 3000
    gamma: float = 1.0
    lam: float = 1.0
    lr: float = 1e-4
    batch: int = 8
    seed: int = 0
    image_size: int = 64
    init: str = "he"
    # "end-to-end" trains both nets on the multi-loss; "boundary" trains only
    # the regression net on the distance loss
    mode: str = "end-to-end"
    eval_every: int = 0
    # start the regression head at the mean target instead of sigmoid(0) = 0.5
    head_prior: bool = True
    arch: Architecture = field(default_factory=Architecture)

    def validate(self):
        if self.steps < 1:
            raise DomainError("steps must be >= 1")
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if not self.lam > 0:
            raise DomainError("lambda must be positive")
        if self.batch < 1:
            raise DomainError("batch must be >= 1")
        if self.mode not in ("end-to-end", "boundary"):
            raise DomainError(f"unknown training mode {self.mode!r}")


@dataclass
class TraceRow:
    step: int
    ld: float
    ls: float
    w_dist: float
    w_cls: float
    loss: float


@dataclass
class TrainResult:
    net: SegNet
    trace: list
    val_dice: list
    seconds: float


def _batches(n: int, batch: int, seed: int):
    """Endless stream of index batches: seeded shuffle per epoch, sequential slices."""
    epoch = 0
    while True:
        perm = Stream(seed, epoch, salt=0xBA7C).permutation(n)
        for s in range(0, n - batch + 1 if n >= batch else 1, batch):
            yield perm[s:s + batch]
        epoch += 1


def train_step(net: SegNet, x, target, mask, tau, cfg: TrainConfig, state: AdamState):
    """One forward/backward/update; returns the trace row."""
    npix = target.size
    if cfg.mode == "boundary":
        phi, bcache = net.boundary_forward(x)
        diff = phi - target
        ld = float(np.sum(diff * diff)) / npix
        grads = net.backward((bcache, None), 2.0 * diff / npix, None)
        adam_step(net.params, grads, state, cfg.lr)
        return TraceRow(tau, ld, float("nan"), 1.0, 0.0, ld)
    w_dist, w_cls = losses.schedule(tau, cfg.steps, cfg.gamma)
    phi, probs, caches = net.forward(x)
    diff = phi - target
    ld = float(np.sum(diff * diff)) / npix
    ls = losses.loss_crossentropy(probs, mask)
    d_phi = w_dist * 2.0 * diff / npix
    d_logits = w_cls * losses.crossentropy_logit_grad(probs, mask)
    grads = net.backward(caches, d_phi, d_logits)
    adam_step(net.params, grads, state, cfg.lr)
    return TraceRow(tau, ld, ls, w_dist, w_cls, w_dist * ld + w_cls * ls)


def targets_for(dataset, lam):
    return np.stack([dm.encode_mask(item.mask, lam).values for item in dataset])


def set_head_prior(net: SegNet, targets) -> None:
    """Set the regression head's bias to logit(mean target).

    With zero bias the untrained map sits at 0.5 while most targets are near
    0; the fastest descent direction then pushes every logit down until the
    sigmoid saturates everywhere and the gradient vanishes (an all-zero map).
    Starting at the target prior removes that direction.
    """
    p = float(np.clip(np.mean(targets), 1e-6, 1 - 1e-6))
    net.params["head.b"][:] = np.log(p / (1.0 - p))


def train(cfg: TrainConfig, dataset, validation=None, net: SegNet | None = None,
          progress=None) -> TrainResult:
    """Train on ``dataset`` (list of LabeledImage) for steps 0..N inclusive.

    Step ``tau`` weights the losses by ``(1 - tau/N, gamma * tau/N)``, so the
    run ends on a pure classification step.
    """
    cfg.validate()
    if not dataset:
        raise DomainError("training set is empty")
    for item in dataset:
        if item.image.shape != (cfg.image_size, cfg.image_size):
            raise DomainError(f"{item.name}: size {item.image.shape} != {cfg.image_size}")
    t0 = time.perf_counter()
    images = np.stack([item.image for item in dataset])
    masks = np.stack([item.mask for item in dataset])
    targets = targets_for(dataset, cfg.lam)
    if net is None:
        net = SegNet(cfg.arch, seed=cfg.seed, init=cfg.init)
        if cfg.head_prior:
            set_head_prior(net, targets)
    state = AdamState()
    trace, val_dice = [], []
    batches = _batches(len(dataset), min(cfg.batch, len(dataset)), cfg.seed)
    for tau in range(cfg.steps + 1):
        idx = next(batches)
        row = train_step(net, image_to_input(images[idx]), targets[idx][:, None], masks[idx],
                         tau, cfg, state)
        trace.append(row)
        if not np.isfinite(row.loss):
            raise FloatingPointError(f"loss diverged at step {tau}")
        if validation and cfg.eval_every and (tau % cfg.eval_every == 0 or tau == cfg.steps):
            val_dice.append((tau, mean_dice(net, validation, cfg)))
            log.info("step %d loss %.5f val dice %.4f", tau, row.loss, val_dice[-1][1])
        if progress is not None:
            progress(row)
    return TrainResult(net, trace, val_dice, time.perf_counter() - t0)


def mean_dice(net: SegNet, items, cfg: TrainConfig) -> float:
    from ..metrics import dice

    scores = []
    for item in items:
        if cfg.mode == "boundary":
            from ..contour import reconstruct_mask
            from ..errors import ReconstructionError

            try:
                pred = reconstruct_mask(predict_distance(net, item.image, cfg.lam))
            except ReconstructionError:
                pred = np.zeros_like(item.mask)
        else:
            pred = predict_mask(net, item.image)
        scores.append(dice(pred, item.mask))
    return float(np.mean(scores))


def pad8(img):
    """Edge-pad a 2-D image up to multiples of 8; returns it and the original (h, w)."""
    h, w = img.shape
    ph, pw = (-h) % 8, (-w) % 8
    if ph or pw:
        img = np.pad(img, ((0, ph), (0, pw)), mode="edge")
    return img, (h, w)


def predict_distance(net: SegNet, image, lam: float = 1.0) -> dm.DistanceMap:
    """Boundary-net output for one image; edge-pads to a multiple of 8 and crops."""
    img, (h, w) = pad8(np.asarray(image, dtype=np.float64))
    phi, _ = net.boundary_forward(image_to_input(img))
    return dm.DistanceMap(phi[0, 0, :h, :w].copy(), lam)


def predict_probs(net: SegNet, image) -> np.ndarray:
    img, (h, w) = pad8(np.asarray(image, dtype=np.float64))
    _, probs, _ = net.forward(image_to_input(img))
    return probs[0, :, :h, :w]


def predict_mask(net: SegNet, image) -> np.ndarray:
    """End-to-end mask: argmax of the pixel net's class probabilities."""
    img, (h, w) = pad8(np.asarray(image, dtype=np.float64))
    phi, _ = net.boundary_forward(image_to_input(img))
    return net.pixel_mask(phi[0, 0])[:h, :w]
