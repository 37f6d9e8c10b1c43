"""Finite-difference check of the analytic gradients of the training loss."""
from __future__ import annotations

import numpy as np

from . import losses
from .model import Architecture, SegNet, run_forward

TOY_ARCH = Architecture(encoder=(2, 2, 2), projection=2, deconv_in=(2, 2, 2), deconv_out=2, pixel=2)
KINK_MARGIN = 1e-4
REL_FLOOR = 1e-8


def _loss(net, x, target, mask, w_dist, w_cls):
    """The training loss, evaluated in the dtype of the parameters."""
    phi, probs, _ = net.forward(x)
    diff = phi - target
    p_true = np.where(mask, probs[:, 1], probs[:, 0])
    ce = np.mean(-np.log(np.maximum(p_true, losses.CE_FLOOR)))
    return w_dist * np.sum(diff * diff) / target.size + w_cls * ce


def _loss_and_grads(net, x, target, mask, w_dist, w_cls):
    phi, probs, caches = net.forward(x)
    diff = phi - target
    npix = target.size
    loss = w_dist * float(np.sum(diff * diff)) / npix + w_cls * losses.loss_crossentropy(probs, mask)
    grads = net.backward(caches, w_dist * 2.0 * diff / npix,
                         w_cls * losses.crossentropy_logit_grad(probs, mask))
    return loss, grads


def _min_preactivation(net, x):
    """Smallest |input| to any ReLU, so draws sitting on a kink can be rejected."""
    smallest = np.inf
    h = x
    for spec in net.boundary_specs + net.pixel_specs:
        if spec.kind == "relu":
            smallest = min(smallest, float(np.abs(h).min()))
        if spec.name == "pix1":
            h = np.repeat(h, 3, axis=1)
        h, _ = run_forward([spec], net.params, h)
    return smallest


def grad_check(arch: Architecture = TOY_ARCH, seed: int = 0, size: int = 8, tau: int = 1,
               total: int = 2, gamma: float = 1.0, h: float = 1e-5, max_draws: int = 100,
               extended: bool = False) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks every parameter of the boundary and pixel nets on one ``size`` x
    ``size`` input under the multi-loss at step ``tau`` of ``total`` (the
    default is the midpoint, where both terms are active; ``tau=0`` checks
    the distance loss alone). Weights are He-scaled normals with small
    random biases; draws where any ReLU input lies within 1e-4 of zero are
    rejected so the difference quotient never straddles a kink. The error
    per entry is ``|a - n| / max(|a|, |n|, 1e-8)``.

    The difference quotients are taken in double precision unless
    ``extended`` is set, in which case the perturbed losses are evaluated in
    long double. That removes the roundoff floor (about 1e-11 absolute) that
    dominates entries whose gradient is near 1e-8; the analytic side is
    always the float64 backward pass.
    """
    w_dist, w_cls = losses.schedule(tau, total, gamma)
    for draw in range(max_draws):
        rng = np.random.Generator(np.random.PCG64([seed, draw]))
        net = SegNet(arch, seed=0)
        for k, v in net.params.items():
            if k.endswith(".b"):
                v[...] = rng.uniform(-0.1, 0.1, size=v.shape)
            else:
                # He scaling keeps gradients of the early layers well above roundoff
                v[...] = rng.normal(0.0, np.sqrt(2.0 / v[0].size), size=v.shape)
        x = rng.uniform(-1.0, 1.0, size=(1, 1, size, size))
        if _min_preactivation(net, x) > KINK_MARGIN:
            break
    else:
        raise RuntimeError("could not find a kink-free draw")
    target = rng.uniform(0.0, 1.0, size=(1, 1, size, size))
    mask = rng.uniform(size=(1, size, size)) < 0.5
    _, grads = _loss_and_grads(net, x, target, mask, w_dist, w_cls)
    if extended:
        ld = np.longdouble
        net = SegNet(arch, params={k: v.astype(ld) for k, v in net.params.items()})
        x, target, h = x.astype(ld), target.astype(ld), ld(h)
    worst = 0.0
    for name, p in net.params.items():
        flat = p.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = _loss(net, x, target, mask, w_dist, w_cls)
            flat[i] = old - h
            down = _loss(net, x, target, mask, w_dist, w_cls)
            flat[i] = old
            num = float((up - down) / (2 * h))
            err = abs(g[i] - num) / max(abs(g[i]), abs(num), REL_FLOOR)
            worst = max(worst, err)
    return worst
