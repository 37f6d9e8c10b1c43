import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage
from scipy.spatial import ConvexHull

from bdseg import contour, synth
from bdseg import distance_map as dm
from bdseg.errors import DomainError, ReconstructionError
from bdseg.metrics import dice

EIGHT = np.ones((3, 3), bool)


# --- oracles ------------------------------------------------------------------------

def _components(mask, structure=EIGHT):
    return ndimage.label(mask, structure=structure)[1]


def brute_mst_weight(pts):
    """Minimum total weight over all spanning trees of the complete graph."""
    n = len(pts)
    if n == 1:
        return 0.0
    edges = list(itertools.combinations(range(n), 2))
    w = {e: math.dist(pts[e[0]], pts[e[1]]) for e in edges}
    best = math.inf
    for subset in itertools.combinations(edges, n - 1):
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                a = parent[a]
            return a
        ok = True
        for i, j in subset:
            ri, rj = find(i), find(j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if ok:
            best = min(best, sum(w[e] for e in subset))
    return best


def brute_max_path(nodes, edges, weights):
    """Largest weight over all simple paths, by walking every pair's tree path."""
    n = len(nodes)
    adj = {i: [] for i in range(n)}
    for (a, b), w in zip(edges, weights):
        adj[a].append((b, w))
        adj[b].append((a, w))
    best = 0.0
    for s in range(n):
        stack = [(s, -1, 0.0)]
        while stack:
            u, par, d = stack.pop()
            best = max(best, d)
            for v, w in adj[u]:
                if v != par:
                    stack.append((v, u, d + w))
    return best


def even_odd_inside(poly, x, y):
    inside = False
    n = len(poly)
    for k in range(n):
        (x1, y1), (x2, y2) = poly[k], poly[(k + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


point_sets = st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=6, unique=True)


# --- skeletonize ------------------------------------------------------------------------

def test_skeleton_trivial_cases():
    assert not contour.skeletonize(np.zeros((5, 5), bool)).any()
    ring = np.zeros((9, 9), bool)
    ring[2, 2:7] = ring[6, 2:7] = ring[2:7, 2] = ring[2:7, 6] = True
    assert np.array_equal(contour.skeletonize(ring), ring)


def test_thick_ring_thins_to_one_loop():
    ys, xs = np.mgrid[0:40, 0:40]
    r = np.hypot(xs - 19.5, ys - 19.5)
    thick = (r >= 10) & (r <= 13)
    sk = contour.skeletonize(thick)
    assert np.all(sk <= thick)
    assert _components(sk) == 1
    assert _components(~sk, structure=None) == 2  # one hole -> one loop
    # 1-pixel wide: no 2x2 block fully set
    assert not (sk[:-1, :-1] & sk[1:, :-1] & sk[:-1, 1:] & sk[1:, 1:]).any()


@given(arrays(bool, (10, 12)))
def test_skeleton_subset_and_component_count(mask):
    sk = contour.skeletonize(mask)
    assert np.all(sk <= mask)
    assert _components(sk) == _components(mask)


# --- spanning tree ----------------------------------------------------------------------

def test_mst_examples():
    t = contour.mst_kruskal([(0, 0), (0, 1), (0, 2)])
    assert t.total_weight == 2
    assert sorted(map(tuple, t.nodes[t.edges].reshape(-1, 4).tolist())) == [(0, 0, 0, 1), (0, 1, 0, 2)]
    sq = contour.mst_kruskal([(0, 0), (1, 0), (0, 1), (1, 1)])
    assert sq.total_weight == 3 and len(sq.edges) == 3
    one = contour.mst_kruskal([(4, 5)])
    assert len(one.nodes) == 1 and len(one.edges) == 0
    with pytest.raises(DomainError):
        contour.mst_kruskal(np.zeros((0, 2)))
    with pytest.raises(DomainError):
        contour.mst_kruskal([(1, 1), (1, 1)])


@given(point_sets)
def test_mst_weight_matches_brute_force(pts):
    t = contour.mst_kruskal(pts)
    assert len(t.edges) == len(pts) - 1
    assert t.total_weight == pytest.approx(brute_mst_weight(pts), abs=1e-9)


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=2, max_size=60, unique=True))
def test_knn_graph_gives_same_tree_weight(pts):
    full = contour.mst_kruskal(pts)
    knn = contour.mst_kruskal(pts, neighbors=8)
    assert knn.total_weight == pytest.approx(full.total_weight, abs=1e-9)


def test_tree_max_path_examples():
    chain = contour.tree_max_path(contour.mst_kruskal([(0, 0), (0, 1), (0, 2)]))
    assert len(chain) == 3 and chain.length == 2
    star = contour.SpanningTree(np.array([[0, 0], [0, 3], [0, -3], [1, 0]]),
                                np.array([[0, 1], [0, 2], [0, 3]]), np.array([3.0, 3.0, 1.0]))
    p = contour.tree_max_path(star)
    assert p.length == 6
    assert {tuple(p.points[0]), tuple(p.points[-1])} == {(0, 3), (0, -3)}
    assert tuple(p.points[1]) == (0, 0)
    single = contour.tree_max_path(contour.mst_kruskal([(2, 2)]))
    assert len(single) == 1 and single.length == 0


@given(st.lists(st.tuples(st.integers(0, 12), st.integers(0, 12)), min_size=1, max_size=7, unique=True))
def test_tree_max_path_matches_brute_force(pts):
    t = contour.mst_kruskal(pts)
    p = contour.tree_max_path(t)
    assert p.length == pytest.approx(brute_max_path(t.nodes, t.edges, t.weights), abs=1e-9)
    assert all(tuple(a) != tuple(b) for a, b in zip(p.points[:-1], p.points[1:]))


# --- close and fill ------------------------------------------------------------------------

def test_square_fill():
    m = contour.close_and_fill([(1, 1), (1, 4), (4, 4), (4, 1)], 6, 6)
    assert m.sum() == 16 and m[1:5, 1:5].all()


def test_degenerate_paths():
    line = contour.close_and_fill([(0, 0), (2, 2), (4, 4)], 6, 6)
    assert line.sum() == 5 and all(line[i, i] for i in range(5))
    with pytest.raises(DomainError):
        contour.close_and_fill([(0, 0), (3, 3)], 6, 6)


def test_triangle_matches_half_plane():
    m = contour.close_and_fill([(0, 0), (4, 0), (0, 4)], 6, 6)
    ys, xs = np.mgrid[0:6, 0:6]
    assert np.array_equal(m, (xs + ys <= 4))


@given(st.lists(st.tuples(st.integers(1, 28), st.integers(1, 28)), min_size=3, max_size=12, unique=True))
def test_fill_agrees_with_even_odd_oracle(pts):
    pts = np.array(pts)
    try:
        hull = ConvexHull(pts)
    except Exception:  # collinear input
        return
    poly = [tuple(p) for p in pts[hull.vertices]]
    m = contour.close_and_fill(poly, 30, 30)
    from bdseg import _kernels
    edge = _kernels.draw_lines(np.array(poly), True, 30, 30).astype(bool)
    assert np.all(m[edge])
    for y in range(30):
        for x in range(30):
            if not edge[y, x]:
                assert m[y, x] == even_odd_inside(poly, x, y)


# --- reconstruction ----------------------------------------------------------------------

def test_reconstruct_errors():
    with pytest.raises(ReconstructionError, match="no boundary detected"):
        contour.reconstruct_mask(dm.DistanceMap(np.zeros((8, 8)), 1.0))


@pytest.mark.parametrize("kind", ["square", "circle"])
def test_reconstruct_perfect_ring(kind):
    # rings that the 3x3 closing leaves unchanged; 8-connected staircases
    # (diamonds, small circles) get their step pixels closed first
    ys, xs = np.mgrid[0:30, 0:30]
    if kind == "square":
        ring = np.zeros((30, 30), bool)
        ring[5, 5:20] = ring[19, 5:20] = ring[5:20, 5] = ring[5:20, 19] = True
    else:
        ring = dm.contour_mask(dm.boundary_of_mask((xs - 14.3) ** 2 + (ys - 15.1) ** 2 <= 144), 30, 30)
    pred = dm.DistanceMap(np.where(ring, 1.0, 0.01), 1.0)
    got = contour.reconstruct_mask(pred)
    assert np.array_equal(got, ndimage.binary_fill_holes(ring))


def test_reconstruct_synthetic_round_trip_and_determinism():
    for item in synth.gen_dataset(10, synth.ShapeParams(seed=5)):
        pred = dm.encode_mask(item.mask, 1.0)
        a = contour.reconstruct_mask(pred)
        assert dice(a, item.mask) >= 0.95
        assert np.array_equal(a, contour.reconstruct_mask(pred))
        assert np.array_equal(a, contour.reconstruct_mask(pred, neighbors=8))


def test_closing_keeps_border_pixels():
    m = np.zeros((5, 5), bool)
    m[0, :] = True
    assert np.array_equal(contour.close3x3(m), m)


def test_largest_component():
    m = np.zeros((6, 6), bool)
    m[0, 0] = True
    m[3:5, 3:5] = True
    assert np.array_equal(contour.largest_component(m), np.pad(np.ones((2, 2), bool), ((3, 1), (3, 1))))
