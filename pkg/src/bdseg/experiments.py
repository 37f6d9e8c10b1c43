"""Desk-scale experiments: lambda ablation and end-to-end vs post-processing."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import synth, tps
from .config import RunConfig
from .contour import reconstruct_mask
from .distance_map import DistanceMap, encode_mask
from .errors import ReconstructionError
from .metrics import dice, evaluate, mean_std
from .nets.model import image_to_input
from .nets.train import pad8, predict_distance, predict_mask, train

DEFAULT_LAMBDA = 1.0


def datasets(cfg: RunConfig, augment: bool | None = None):
    """Training and test items from the manifests, or generated when absent."""
    params = cfg.shape_params()
    if cfg["train_manifest"]:
        train_items = synth.read_manifest(cfg["train_manifest"])
    else:
        train_items = synth.gen_dataset(cfg["n_train"], params)
    if cfg["test_manifest"]:
        test_items = synth.read_manifest(cfg["test_manifest"])
    else:
        test_items = synth.gen_dataset(cfg["n_test"], params, start=cfg["test_start"])
    if cfg["augment"] if augment is None else augment:
        train_items = tps.augment_dataset(train_items)
    return train_items, test_items


def map_jobs(fn, args, jobs: int = 1):
    """Ordered map, fanned out over ``jobs`` worker processes when > 1."""
    if jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args))


def _postprocess_one(arg):
    """(values, lam, neighbors) -> reconstructed mask or None on failure."""
    values, lam, neighbors = arg
    try:
        return reconstruct_mask(DistanceMap(values, lam), neighbors or None)
    except ReconstructionError:
        return None


# --- lambda ablation ----------------------------------------------------------------

@dataclass
class AblationRow:
    lam: float
    dice: list
    md: list
    failures: int

    @property
    def dice_mean(self) -> float:
        return float(np.mean(self.dice))


def ablate_lambda(cfg: RunConfig, train_items, test_items, jobs: int = 1, progress=None):
    """Train boundary nets for each lambda and score their reconstructed masks.

    A failed reconstruction scores Dice 0 and is left out of the MD column.
    """
    rows = []
    for lam in cfg["lambdas"]:
        tc = cfg.train_config(lam=lam, mode="boundary", eval_every=0)
        net = train(tc, train_items).net
        maps = [(predict_distance(net, it.image, lam).values, lam, cfg["neighbors"]) for it in test_items]
        masks = map_jobs(_postprocess_one, maps, jobs)
        d, md, fails = [], [], 0
        for mask, item in zip(masks, test_items):
            if mask is None or not mask.any():
                fails += 1
                d.append(0.0)
                continue
            rep = evaluate(mask, item.mask)
            d.append(rep.dice)
            md.append(rep.mean_distance)
        rows.append(AblationRow(lam, d, md, fails))
        if progress is not None:
            progress(rows[-1])
    return rows


def ablation_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("lambda", "dice_mean±std", "md_mean±std", "failures", "default"))
    for r in rows:
        md = mean_std(r.md) if r.md else "nan"
        w.writerow((f"{r.lam:g}", mean_std(r.dice), md, r.failures,
                    "yes" if r.lam == DEFAULT_LAMBDA else ""))
    return buf.getvalue()


# --- end-to-end vs post-processing ----------------------------------------------------

@dataclass
class PathResult:
    name: str
    dice_end_to_end: float
    dice_postprocess: float
    mask_end_to_end: np.ndarray
    mask_postprocess: np.ndarray


def compare_paths(net, test_items, lam: float, neighbors: int = 0, jobs: int = 1):
    """Dice of the pixel-net masks and of the reconstructed boundary-net masks."""
    e2e = [predict_mask(net, it.image) for it in test_items]
    maps = [(predict_distance(net, it.image, lam).values, lam, neighbors) for it in test_items]
    post = map_jobs(_postprocess_one, maps, jobs)
    out = []
    for it, a, b in zip(test_items, e2e, post):
        if b is None:
            b = np.zeros_like(it.mask)
        out.append(PathResult(it.name, dice(a, it.mask), dice(b, it.mask), a, b))
    return out


def paths_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("name", "dice_end_to_end", "dice_postprocess"))
    for r in results:
        w.writerow((r.name, f"{r.dice_end_to_end:.6f}", f"{r.dice_postprocess:.6f}"))
    w.writerow(("mean±std", mean_std([r.dice_end_to_end for r in results]),
                mean_std([r.dice_postprocess for r in results])))
    return buf.getvalue()


@dataclass
class TimingRow:
    name: str
    seconds_end_to_end: float
    seconds_postprocess: float
    seconds_postprocess_predicted: float
    predicted_ok: bool


def _best_time(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def time_paths(net, items, lam: float, neighbors: int = 0, repeats: int = 5):
    """Per-image wall time of each full inference path (best of ``repeats``).

    End-to-end: boundary net, pixel net, argmax. Post-processing: boundary
    net, then decode, closing, thinning, spanning tree, max path and fill of
    the truth mask's encoded map, i.e. the work a correct boundary prediction
    costs. A model trained at a smaller scale predicts only scattered boundary
    pixels at the timing size, which would make the spanning-tree stage look
    free; that variant is still reported as ``seconds_postprocess_predicted``.
    """
    k = neighbors or None
    rows = []
    for it in items:
        img, _ = pad8(np.asarray(it.image, dtype=np.float64))
        x = image_to_input(img)
        reference = encode_mask(it.mask, lam)
        predicted = predict_distance(net, it.image, lam)
        ok = True

        def post_predicted():
            nonlocal ok
            net.boundary_forward(x)
            try:
                reconstruct_mask(predicted, k)
            except ReconstructionError:
                ok = False

        t_a = _best_time(lambda: predict_mask(net, it.image), repeats)
        t_b = _best_time(lambda: (net.boundary_forward(x), reconstruct_mask(reference, k)), repeats)
        t_c = _best_time(post_predicted, repeats)
        rows.append(TimingRow(it.name, t_a, t_b, t_c, ok))
    return rows


def timing_images(cfg: RunConfig):
    """Fresh synthetic test pairs at the timing size."""
    params = cfg.shape_params(size=cfg["timing_size"])
    return synth.gen_dataset(cfg["n_test"], params, start=cfg["test_start"])


def timing_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("name", "seconds_end_to_end", "seconds_postprocess", "seconds_postprocess_predicted",
                "predicted_ok"))
    for r in rows:
        w.writerow((r.name, f"{r.seconds_end_to_end:.6f}", f"{r.seconds_postprocess:.6f}",
                    f"{r.seconds_postprocess_predicted:.6f}", int(r.predicted_ok)))
    w.writerow(("mean±std", mean_std([r.seconds_end_to_end for r in rows]),
                mean_std([r.seconds_postprocess for r in rows]),
                mean_std([r.seconds_postprocess_predicted for r in rows]),
                sum(r.predicted_ok for r in rows)))
    return buf.getvalue()
