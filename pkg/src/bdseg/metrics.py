"""Overlap and boundary-distance metrics, batch reports and Wilcoxon tests."""
from __future__ import annotations

import csv
import io
import itertools
import math
import os
from dataclasses import astuple, dataclass, fields

import numpy as np

from . import raster
from .distance_map import boundary_of_mask
from .errors import DomainError

CSV_HEADER = ("name", "dice", "jaccard", "precision", "sensitivity", "md", "assd")


@dataclass
class MetricsReport:
    dice: float
    jaccard: float
    precision: float
    sensitivity: float
    mean_distance: float
    assd: float


@dataclass
class WilcoxonResult:
    n_effective: int
    statistic: float
    p_two_sided: float
    exact: bool = True
    degenerate: bool = False


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise DomainError(f"mask sizes differ: {pred.shape} vs {truth.shape}")
    return pred, truth


def overlap_metrics(pred, truth):
    """(dice, jaccard, precision, sensitivity); a zero denominator gives 0."""
    pred, truth = _pair(pred, truth)
    g = int(truth.sum())
    if g == 0:
        raise DomainError("ground-truth mask is empty")
    p = int(pred.sum())
    inter = int(np.count_nonzero(pred & truth))
    union = p + g - inter
    dice = 2 * inter / (p + g)
    jaccard = inter / union
    precision = inter / p if p else 0.0
    sensitivity = inter / g
    return dice, jaccard, precision, sensitivity


def dice(pred, truth) -> float:
    return overlap_metrics(pred, truth)[0]


def _directed_mean(a: np.ndarray, b: np.ndarray) -> float:
    """Mean over points of ``a`` of the distance to the closest point of ``b``."""
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    total = 0.0
    step = max(1, 1_000_000 // len(b))
    for s in range(0, len(a), step):
        d = np.hypot(a[s:s + step, None, 0] - b[None, :, 0], a[s:s + step, None, 1] - b[None, :, 1])
        total += d.min(axis=1).sum()
    return total / len(a)


def mean_distance(pred_boundary, truth_boundary) -> float:
    """Directed mean distance, predicted boundary -> truth boundary."""
    return _directed_mean(np.asarray(pred_boundary), np.asarray(truth_boundary))


def boundary_distances(pred, truth):
    """(MD, ASSD) between the 4-connected boundaries of two masks, exact."""
    pred, truth = _pair(pred, truth)
    if not pred.any() or not truth.any():
        raise DomainError("boundary distances need two non-empty masks")
    pb, gb = boundary_of_mask(pred), boundary_of_mask(truth)
    return point_set_distances(pb, gb)


def point_set_distances(pb, gb):
    pg = _directed_mean(pb, gb)
    gp = _directed_mean(gb, pb)
    return pg, (pg + gp) / 2.0


def evaluate(pred, truth) -> MetricsReport:
    d, j, p, s = overlap_metrics(pred, truth)
    if np.asarray(pred).any():
        md, assd = boundary_distances(pred, truth)
    else:
        md = assd = math.inf
    return MetricsReport(d, j, p, s, md, assd)


# --- Wilcoxon signed-rank -------------------------------------------------------

EXACT_MAX_N = 12


def _avg_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sv = values[order]
    i = 0
    while i < len(sv):
        j = i
        while j + 1 < len(sv) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def exact_signed_rank_p(ranks: np.ndarray, w: float) -> float:
    """Two-sided p = P(min(W+, W-) <= w) under all 2^n equally likely signs."""
    n = len(ranks)
    total = ranks.sum()
    # doubled ranks are integers even with average ties
    r2 = np.rint(2 * ranks).astype(np.int64)
    counts = np.zeros(int(r2.sum()) + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:len(counts) - r]
        counts = counts + shifted
    wplus2 = np.arange(len(counts))
    stat2 = np.minimum(wplus2, np.rint(2 * total).astype(np.int64) - wplus2)
    hits = counts[stat2 <= int(round(2 * w))].sum()
    return float(min(1.0, hits / 2.0 ** n))


def enumerate_signed_rank_p(ranks, w: float) -> float:
    """Reference p-value by listing every sign pattern (n <= ~16)."""
    ranks = np.asarray(ranks, dtype=np.float64)
    total = ranks.sum()
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(ranks)):
        wp = float(np.dot(signs, ranks))
        if min(wp, total - wp) <= w + 1e-9:
            hits += 1
    return hits / 2 ** len(ranks)


def wilcoxon_signed_rank(a, b) -> WilcoxonResult:
    """Paired two-sided test; zero differences are dropped.

    Exact null distribution for n <= 12 nonzero pairs, otherwise a normal
    approximation with tie-corrected variance and continuity correction.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 1:
        raise DomainError("wilcoxon needs two equal-length, non-empty samples")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(0, 0.0, 1.0, True, True)
    ranks = _avg_ranks(np.abs(d))
    wp = float(ranks[d > 0].sum())
    wm = float(ranks[d < 0].sum())
    w = min(wp, wm)
    if n <= EXACT_MAX_N:
        return WilcoxonResult(n, w, exact_signed_rank_p(ranks, w), True)
    mu = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - (tie_counts ** 3 - tie_counts).sum() / 48.0
    z = (abs(w - mu) - 0.5) / math.sqrt(var)
    p = math.erfc(max(z, 0.0) / math.sqrt(2.0))
    return WilcoxonResult(n, w, min(1.0, p), False)


# --- batch reports ----------------------------------------------------------------

def mean_std(values) -> str:
    v = np.asarray(values, dtype=np.float64)
    return f"{v.mean():.4f}±{v.std():.4f}"


def _pgm_names(folder):
    return sorted(f for f in os.listdir(folder) if f.lower().endswith(".pgm"))


def batch_report(pred_dir, truth_dir):
    """Evaluate every predicted mask against the same-named truth mask.

    Returns ``(rows, summary)`` where rows are ``(name, MetricsReport)`` and
    the summary maps each metric to a ``mean±std`` string.
    """
    preds = _pgm_names(pred_dir)
    truths = set(_pgm_names(truth_dir))
    if not preds:
        raise DomainError(f"no PGM masks in {pred_dir}")
    for name in preds:
        if name not in truths:
            raise DomainError(f"missing counterpart for {name} in {truth_dir}")
    for name in sorted(truths - set(preds)):
        raise DomainError(f"missing counterpart for {name} in {pred_dir}")
    rows = []
    for name in preds:
        pred = raster.load_mask(os.path.join(pred_dir, name))
        truth = raster.load_mask(os.path.join(truth_dir, name))
        rows.append((os.path.splitext(name)[0], evaluate(pred, truth)))
    return rows, summarize([r for _, r in rows])


def summarize(reports) -> dict:
    return {f.name: mean_std([getattr(r, f.name) for r in reports]) for f in fields(MetricsReport)}


def report_csv(rows, summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for name, rep in rows:
        w.writerow([name] + [f"{v:.6f}" for v in astuple(rep)])
    w.writerow(["mean±std"] + [summary[f.name] for f in fields(MetricsReport)])
    return buf.getvalue()


def read_report_csv(path) -> dict:
    """Per-image metric columns from a report CSV (summary row dropped)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise DomainError(f"{path}: not a metrics CSV")
    data = {}
    for row in rows[1:]:
        if row[0] == "mean±std":
            continue
        data[row[0]] = [float(v) for v in row[1:]]
    return data


def compare_reports(path_a, path_b) -> str:
    """``metric,W,p`` rows comparing two report CSVs image-by-image."""
    a, b = read_report_csv(path_a), read_report_csv(path_b)
    names = sorted(set(a) & set(b))
    if not names or len(names) != len(a) or len(names) != len(b):
        raise DomainError("report CSVs must cover the same images")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("metric", "W", "p"))
    for col, metric in enumerate(CSV_HEADER[1:]):
        res = wilcoxon_signed_rank([a[n][col] for n in names], [b[n][col] for n in names])
        w.writerow((metric, f"{res.statistic:g}", f"{res.p_two_sided:.6g}"))
    return buf.getvalue()
