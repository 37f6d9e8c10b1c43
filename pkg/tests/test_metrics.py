import math
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from bdseg import metrics, raster
from bdseg.errors import DomainError

from conftest import disk


def mask_from(idx, shape=(4, 4)):
    m = np.zeros(shape, bool)
    m.flat[list(idx)] = True
    return m


# --- overlap ------------------------------------------------------------------------

def test_overlap_identity_and_disjoint():
    m = disk(16, 8, 8, 4)
    assert metrics.overlap_metrics(m, m) == (1.0, 1.0, 1.0, 1.0)
    assert metrics.overlap_metrics(m, ~m) == (0.0, 0.0, 0.0, 0.0)


def test_overlap_counted_example():
    pred = mask_from(range(6))        # |P| = 6
    truth = mask_from([3, 4, 5, 6])   # |G| = 4, |P & G| = 3
    d, j, p, s = metrics.overlap_metrics(pred, truth)
    assert (d, j, p, s) == (0.6, 3 / 7, 0.5, 0.75)


def test_empty_prediction_and_empty_truth():
    truth = mask_from([1, 2])
    assert metrics.overlap_metrics(np.zeros_like(truth), truth) == (0.0, 0.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        metrics.overlap_metrics(truth, np.zeros_like(truth))
    with pytest.raises(DomainError):
        metrics.overlap_metrics(truth, np.ones((3, 3), bool))


masks = arrays(bool, (6, 7))


@given(masks, masks)
def test_overlap_brute_force_and_identity(pred, truth):
    if not truth.any():
        return
    d, j, p, s = metrics.overlap_metrics(pred, truth)
    pset = {i for i, v in enumerate(pred.flat) if v}
    gset = {i for i, v in enumerate(truth.flat) if v}
    inter = len(pset & gset)
    assert d == pytest.approx(2 * inter / (len(pset) + len(gset)), abs=1e-15)
    assert j == pytest.approx(inter / len(pset | gset), abs=1e-15)
    assert d == pytest.approx(2 * j / (1 + j), abs=1e-12)
    if pred.any():
        # precision and sensitivity swap with the roles
        _, _, p2, s2 = metrics.overlap_metrics(truth, pred)
        assert (p, s) == pytest.approx((s2, p2), abs=1e-15)


# --- boundary distances -------------------------------------------------------------

def test_boundary_distance_examples():
    m = disk(20, 10, 10, 5)
    assert metrics.boundary_distances(m, m) == (0.0, 0.0)
    a, b = np.zeros((3, 5), bool), np.zeros((3, 5), bool)
    a[0, 0] = True
    b[0, 3] = True
    assert metrics.boundary_distances(a, b) == (3.0, 3.0)
    md, assd = metrics.point_set_distances(np.array([[0, 0], [0, 2]]), np.array([[0, 0]]))
    assert (md, assd) == (1.0, 0.5)
    md_rev, assd_rev = metrics.point_set_distances(np.array([[0, 0]]), np.array([[0, 0], [0, 2]]))
    assert md_rev == 0.0 and assd_rev == assd


@given(masks, masks)
def test_distances_against_exhaustive(pred, truth):
    if not pred.any() or not truth.any():
        return
    md, assd = metrics.boundary_distances(pred, truth)
    from bdseg.distance_map import boundary_of_mask
    pb, gb = boundary_of_mask(pred), boundary_of_mask(truth)
    fwd = np.mean([min(math.dist(p, g) for g in gb) for p in pb])
    bwd = np.mean([min(math.dist(g, p) for p in pb) for g in gb])
    assert md == pytest.approx(fwd, abs=1e-12)
    assert assd == pytest.approx((fwd + bwd) / 2, abs=1e-12)
    assert metrics.boundary_distances(truth, pred)[1] == pytest.approx(assd, abs=1e-12)


def test_boundary_distances_empty():
    with pytest.raises(DomainError):
        metrics.boundary_distances(np.zeros((4, 4), bool), mask_from([0]))


def test_evaluate_empty_prediction():
    r = metrics.evaluate(np.zeros((4, 4), bool), mask_from([5]))
    assert r.dice == 0 and math.isinf(r.mean_distance) and math.isinf(r.assd)


# --- Wilcoxon -----------------------------------------------------------------------

def test_wilcoxon_examples():
    r = metrics.wilcoxon_signed_rank(np.ones(5), np.zeros(5))
    assert (r.n_effective, r.statistic, r.p_two_sided) == (5, 0.0, 2 / 32)
    r = metrics.wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0])
    assert r.degenerate and r.p_two_sided == 1.0
    r = metrics.wilcoxon_signed_rank([3.0], [0.0])
    assert (r.statistic, r.p_two_sided) == (0.0, 1.0)


def test_exact_p_matches_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(1, 11))
        # integer differences produce ties and zeros
        d = rng.integers(-4, 5, size=n).astype(float)
        r = metrics.wilcoxon_signed_rank(d, np.zeros(n))
        nz = d[d != 0]
        if len(nz) == 0:
            assert r.degenerate
            continue
        ranks = metrics._avg_ranks(np.abs(nz))
        wp, wm = ranks[nz > 0].sum(), ranks[nz < 0].sum()
        assert r.statistic == min(wp, wm)
        assert 0 <= r.statistic <= len(nz) * (len(nz) + 1) / 2
        assert r.p_two_sided == metrics.enumerate_signed_rank_p(ranks, r.statistic)


def test_avg_ranks():
    np.testing.assert_array_equal(metrics._avg_ranks(np.array([3.0, 1.0, 3.0, 2.0])), [3.5, 1, 3.5, 2])


def test_matches_scipy_exact_without_ties():
    rng = np.random.default_rng(3)
    for n in range(1, 13):
        d = rng.permutation(np.arange(1, n + 1)) * rng.choice([-1, 1], size=n) + 0.0
        ours = metrics.wilcoxon_signed_rank(d, np.zeros(n)).p_two_sided
        ref = stats.wilcoxon(d, method="exact").pvalue
        assert ours == pytest.approx(ref, rel=1e-12)


def test_matches_scipy_normal_approximation():
    rng = np.random.default_rng(4)
    for _ in range(20):
        d = np.round(rng.normal(0.3, 1.0, size=int(rng.integers(20, 40))), 1)
        d[0] = 0.0
        ours = metrics.wilcoxon_signed_rank(d, np.zeros(len(d)))
        ref = stats.wilcoxon(d, zero_method="wilcox", correction=True, method="approx")
        assert not ours.exact
        assert ours.statistic == ref.statistic
        assert ours.p_two_sided == pytest.approx(ref.pvalue, rel=1e-9)


# --- batch reports -------------------------------------------------------------------

def write_pair(folder, name, mask):
    os.makedirs(folder, exist_ok=True)
    raster.save_mask(mask, os.path.join(folder, name))


def test_batch_report(tmp_path):
    pred, truth = tmp_path / "p", tmp_path / "t"
    for name, r in (("a.pgm", 4), ("b.pgm", 6)):
        write_pair(pred, name, disk(16, 8, 8, r))
        write_pair(truth, name, disk(16, 8, 8, r))
    rows, summary = metrics.batch_report(str(pred), str(truth))
    assert summary["dice"] == "1.0000±0.0000"
    text = metrics.report_csv(rows, summary).splitlines()
    assert text[0] == "name,dice,jaccard,precision,sensitivity,md,assd"
    assert len(text) == 1 + 2 + 1  # header, n rows, summary


def test_batch_report_errors(tmp_path):
    (tmp_path / "p").mkdir()
    (tmp_path / "t").mkdir()
    with pytest.raises(DomainError):
        metrics.batch_report(str(tmp_path / "p"), str(tmp_path / "t"))
    write_pair(tmp_path / "p", "a.pgm", disk(8, 4, 4, 2))
    with pytest.raises(DomainError, match="a.pgm"):
        metrics.batch_report(str(tmp_path / "p"), str(tmp_path / "t"))


def test_compare_reports(tmp_path):
    pred, truth = tmp_path / "p", tmp_path / "t"
    for i in range(6):
        write_pair(truth, f"{i}.pgm", disk(16, 8, 8, 5))
        write_pair(pred, f"{i}.pgm", disk(16, 8, 8, 5 - (i % 3 == 0)))
    rows, summary = metrics.batch_report(str(pred), str(truth))
    pa = tmp_path / "a.csv"
    pa.write_text(metrics.report_csv(rows, summary))
    out = metrics.compare_reports(str(pa), str(pa)).splitlines()
    assert out[0] == "metric,W,p"
    assert all(line.endswith(",0,1") for line in out[1:])
