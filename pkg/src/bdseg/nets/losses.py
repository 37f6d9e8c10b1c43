"""Distance loss, pixel cross-entropy and the annealed multi-loss weights."""
from __future__ import annotations

import numpy as np

from ..errors import DomainError, ShapeError

CE_FLOOR = 1e-12


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def loss_distance(pred, target) -> float:
    """Sum over pixels of the squared difference between predicted and target maps."""
    p, t = _values(pred), _values(target)
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} and target {t.shape} differ")
    d = p - t
    return float(np.sum(d * d))


def loss_distance_grad(pred, target) -> np.ndarray:
    return 2.0 * (_values(pred) - _values(target))


def loss_crossentropy(probs, mask) -> float:
    """Mean over pixels of ``-ln p(true class)``; ``probs`` is ``(2, H, W)``.

    Probabilities are clamped at 1e-12 before the logarithm.
    """
    probs = np.asarray(probs, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if probs.shape[-3] != 2 or probs.shape[-2:] != mask.shape[-2:]:
        raise ShapeError(f"probabilities {probs.shape} do not match mask {mask.shape}")
    p_true = np.where(mask, probs[..., 1, :, :], probs[..., 0, :, :])
    return float(np.mean(-np.log(np.maximum(p_true, CE_FLOOR))))


def crossentropy_logit_grad(probs, mask) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the softmax logits."""
    probs = np.asarray(probs, dtype=np.float64)
    onehot = np.stack([~mask, mask], axis=-3).astype(np.float64)
    p_true = np.where(mask, probs[..., 1, :, :], probs[..., 0, :, :])
    g = (probs - onehot) / mask.size
    # clamped terms are constant in the logits
    return np.where((p_true < CE_FLOOR)[..., None, :, :], 0.0, g)


def schedule(tau: int, total: int, gamma: float = 1.0) -> tuple[float, float]:
    """Weights ``(1 - tau/N, gamma * tau/N)`` on the distance and class losses."""
    if total < 1:
        raise DomainError(f"total steps must be >= 1, got {total}")
    if tau < 0 or tau > total:
        raise DomainError(f"step {tau} outside [0, {total}]")
    frac = tau / total
    return 1.0 - frac, gamma * frac


def loss_multi(ld: float, ls: float, tau: int, total: int, gamma: float = 1.0) -> float:
    wd, ws = schedule(tau, total, gamma)
    return wd * ld + ws * ls
