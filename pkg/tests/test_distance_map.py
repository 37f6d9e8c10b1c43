import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bdseg import distance_map as dm
from bdseg import synth
from bdseg.errors import DomainError, ParseError

masks = arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))).filter(lambda m: m.any())


def _boundary_oracle(mask):
    h, w = mask.shape
    out = set()
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                yy, xx = y + dy, x + dx
                if not (0 <= yy < h and 0 <= xx < w) or not mask[yy, xx]:
                    out.add((x, y))
                    break
    return out


def test_boundary_examples():
    single = np.zeros((5, 5), bool)
    single[2, 3] = True
    assert dm.boundary_of_mask(single).tolist() == [[3, 2]]
    block = np.zeros((5, 5), bool)
    block[1:4, 1:4] = True
    ring = {tuple(p) for p in dm.boundary_of_mask(block)}
    assert len(ring) == 8 and (2, 2) not in ring
    full = np.ones((4, 6), bool)
    pts = dm.boundary_of_mask(full)
    assert len(pts) == 2 * 6 + 2 * 4 - 4
    assert all(x in (0, 5) or y in (0, 3) for x, y in pts)
    with pytest.raises(DomainError):
        dm.boundary_of_mask(np.zeros((3, 3), bool))


@given(masks)
def test_boundary_matches_neighbour_scan(mask):
    assert {tuple(p) for p in dm.boundary_of_mask(mask)} == _boundary_oracle(mask)


def test_min_distance_examples():
    assert dm.min_boundary_distance((1, 1), [(1, 1), (5, 5)]) == 0
    assert dm.min_boundary_distance((0, 0), [(3, 4)]) == 5
    assert dm.min_boundary_distance((2, 2), [(0, 0), (4, 4)]) == pytest.approx(2 * math.sqrt(2), abs=1e-12)


def test_encode_examples():
    d = dm.encode_distance_map([(2, 2)], 5, 5, 1.0)
    assert d.values[2, 2] == 1.0
    assert d.values[0, 0] == pytest.approx(math.exp(-2 * math.sqrt(2)), abs=1e-12)
    assert d.values[0, 0] == pytest.approx(0.059106, abs=1e-6)
    assert d.values[2, 0] == pytest.approx(0.135335, abs=1e-6)
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(DomainError):
            dm.encode_distance_map([(2, 2)], 5, 5, bad)


@given(masks, st.sampled_from([0.01, 0.1, 1.0, 10.0]))
def test_edt_matches_exhaustive_oracle(mask, lam):
    h, w = mask.shape
    c = dm.boundary_of_mask(mask)
    oracle = np.exp(-lam * dm.exhaustive_distance_field(c, w, h))
    d = dm.encode_distance_map(c, w, h, lam)
    assert np.max(np.abs(d.values - oracle)) <= 1e-12
    assert np.all(d.values > 0) and np.all(d.values <= 1)
    assert np.all(d.values[mask & dm.contour_mask(c, w, h)] == 1.0)


@given(masks)
def test_decode_encode_is_distance_at_most_one(mask):
    h, w = mask.shape
    c = dm.boundary_of_mask(mask)
    dist = dm.exhaustive_distance_field(c, w, h)
    assert np.array_equal(dm.decode_boundary(dm.encode_mask(mask, 1.0)), dist <= 1)


@given(masks)
def test_monotone_in_distance_and_lambda(mask):
    h, w = mask.shape
    c = dm.boundary_of_mask(mask)
    dist = dm.exhaustive_distance_field(c, w, h).ravel()
    lo, hi = dm.encode_distance_map(c, w, h, 0.5).values, dm.encode_distance_map(c, w, h, 2.0).values
    v = lo.ravel()
    order = np.argsort(dist)
    ds, vs = dist[order], v[order]
    strict = ds[1:] > ds[:-1]
    assert np.all(vs[1:][strict] < vs[:-1][strict])
    assert np.all(hi <= lo)


def test_decode_threshold_examples():
    vals = np.array([[0.5, 0.3, math.exp(-1.0)]])
    assert dm.decode_boundary(dm.DistanceMap(vals, 1.0)).tolist() == [[True, False, True]]
    # sqrt(2) is the smallest grid distance past 1
    below = np.array([[math.exp(-math.sqrt(2)), math.exp(-1.0) * (1 - 1e-6)]])
    assert not dm.decode_boundary(dm.DistanceMap(below, 1.0)).any()


@pytest.mark.parametrize("lam", [0.01, 0.1, 1.0, 10.0])
def test_decode_on_synthetic_fixtures(lam):
    for item in synth.gen_dataset(5, synth.ShapeParams(seed=3)):
        c = dm.boundary_of_mask(item.mask)
        dist = dm.exhaustive_distance_field(c, 64, 64)
        dec = dm.decode_boundary(dm.encode_mask(item.mask, lam))
        assert np.array_equal(dec, dist <= 1)
        assert dec[c[:, 1], c[:, 0]].all()


@pytest.mark.parametrize("lam", [1.0, 0.01, 0.1, 10.0, 0.3])
def test_dmap_roundtrip(lam, tmp_path):
    d = dm.encode_mask(np.pad(np.ones((3, 4), bool), 2), lam)
    dm.save_dmap(d, tmp_path / "a.dmap")
    back = dm.load_dmap(tmp_path / "a.dmap")
    assert np.array_equal(back.values, d.values)
    assert back.lam == lam
    raw = (tmp_path / "a.dmap").read_bytes()
    assert raw[:4] == b"DMAP" and len(raw) == 16 + 8 * d.values.size


def test_dmap_parse_errors():
    good = dm.encode_dmap(dm.DistanceMap(np.ones((2, 2)), 1.0))
    for bad in (b"", good[:10], b"XMAP" + good[4:], good[:-1], good + b"\0"):
        with pytest.raises(ParseError):
            dm.parse_dmap(bad)


def test_heatmap_values():
    d = dm.DistanceMap(np.array([[1.0, 0.5, 0.2, 1e-9]]), 1.0)
    assert dm.heatmap(d).tolist() == [[255, 128, 51, 0]]
    ones = dm.DistanceMap(np.ones((3, 3)), 1.0)
    assert np.all(dm.heatmap(ones) == 255)


@given(arrays(np.float64, (3, 4), elements=st.floats(1e-6, 1.0)))
def test_heatmap_quantisation_bound(vals):
    h = dm.heatmap(dm.DistanceMap(vals, 1.0))
    assert np.max(np.abs(h / 255.0 - vals)) <= 0.5 / 255 + 1e-12
