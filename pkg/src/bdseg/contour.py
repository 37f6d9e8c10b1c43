"""Predicted distance map -> closed contour -> filled mask.

decode (threshold at exp(-lambda)) -> 3x3 closing -> thinning -> largest
8-connected piece -> Euclidean minimum spanning tree (Kruskal) -> longest
weighted path in the tree -> close the path with a straight segment -> fill.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import _kernels
from .distance_map import DistanceMap, decode_boundary
from .errors import DomainError, ReconstructionError

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class SpanningTree:
    nodes: np.ndarray     # (n, 2) int (x, y), lexicographically sorted
    edges: np.ndarray     # (n - 1, 2) node indices
    weights: np.ndarray   # (n - 1,) Euclidean edge lengths

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


@dataclass
class PixelPath:
    points: np.ndarray    # (m, 2) int (x, y), in path order
    length: float         # summed Euclidean length of the tree edges used

    def __len__(self):
        return len(self.points)


def skeletonize(mask: np.ndarray) -> np.ndarray:
    """Thin a binary mask to 1-pixel-wide curves (Zhang-Suen)."""
    mask = np.asarray(mask, dtype=bool)
    return _kernels.zhang_suen(mask.astype(np.uint8)).astype(bool)


def _sorted_nodes(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    if len(pts) == 0:
        raise DomainError("cannot build a spanning tree on zero points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    if len(pts) > 1 and np.any(np.all(pts[1:] == pts[:-1], axis=1)):
        raise DomainError("spanning-tree points must be distinct")
    return pts


def _complete_edges(pts):
    i, j = np.triu_indices(len(pts), k=1)
    d = pts[i] - pts[j]
    return i, j, d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]


def _knn_edges(pts, k):
    tree = cKDTree(pts)
    _, nbr = tree.query(pts, k=min(k + 1, len(pts)))
    i = np.repeat(np.arange(len(pts)), nbr.shape[1])
    j = nbr.ravel()
    keep = i != j
    pairs = np.unique(np.sort(np.stack([i[keep], j[keep]], axis=1), axis=1), axis=0)
    i, j = pairs[:, 0], pairs[:, 1]
    d = pts[i] - pts[j]
    return i, j, d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]


def mst_kruskal(points, neighbors: int | None = None) -> SpanningTree:
    """Minimum spanning tree of the Euclidean graph on ``points``.

    Edges are sorted by (squared length, i, j) with nodes in lexicographic
    (x, y) order, so ties resolve deterministically. With ``neighbors=k`` only
    each point's k nearest neighbours are candidate edges; if that graph is
    disconnected the complete graph is used instead.
    """
    pts = _sorted_nodes(points)
    n = len(pts)
    if n == 1:
        return SpanningTree(pts, np.zeros((0, 2), dtype=np.int64), np.zeros(0))
    if neighbors is not None and n > neighbors + 1:
        i, j, d2 = _knn_edges(pts, neighbors)
        order = np.lexsort((j, i, d2))
        chosen = _kernels.kruskal(n, i[order], j[order])
        if len(chosen) == n - 1:
            sel = order[chosen]
            return SpanningTree(pts, np.stack([i[sel], j[sel]], axis=1), np.sqrt(d2[sel].astype(np.float64)))
    i, j, d2 = _complete_edges(pts)
    order = np.lexsort((j, i, d2))
    chosen = _kernels.kruskal(n, i[order], j[order])
    sel = order[chosen]
    return SpanningTree(pts, np.stack([i[sel], j[sel]], axis=1), np.sqrt(d2[sel].astype(np.float64)))


def _csr(tree: SpanningTree):
    n = len(tree.nodes)
    e = tree.edges
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    w = np.concatenate([tree.weights, tree.weights])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    return np.cumsum(indptr), dst[order].astype(np.int64), w[order]


def tree_max_path(tree: SpanningTree) -> PixelPath:
    """Longest simple path (by edge weight) via two farthest-node sweeps."""
    n = len(tree.nodes)
    if n == 0:
        raise DomainError("empty tree")
    if n == 1:
        return PixelPath(tree.nodes.copy(), 0.0)
    indptr, indices, weights = _csr(tree)
    dist, _ = _kernels.tree_distances(indptr, indices, weights, 0)
    u = int(np.argmax(dist))
    dist, parent = _kernels.tree_distances(indptr, indices, weights, u)
    v = int(np.argmax(dist))
    path = [v]
    while path[-1] != u:
        path.append(int(parent[path[-1]]))
    path.reverse()
    return PixelPath(tree.nodes[path], float(dist[v]))


def close_and_fill(path, w: int, h: int) -> np.ndarray:
    """Rasterize the path plus a closing segment (Bresenham), then fill inside.

    The inside is everything not reachable from the image border through
    4-connected non-contour pixels.
    """
    pts = np.asarray(getattr(path, "points", path), dtype=np.int64).reshape(-1, 2)
    if len(pts) < 3:
        raise DomainError(f"need at least 3 path points to enclose an area, got {len(pts)}")
    lines = _kernels.draw_lines(pts, True, h, w).astype(bool)
    return ndimage.binary_fill_holes(lines)


def close3x3(mask: np.ndarray) -> np.ndarray:
    """Binary closing with a 3x3 square; the image border does not erode."""
    padded = np.pad(np.asarray(mask, dtype=bool), 2)
    return ndimage.binary_closing(padded, structure=_EIGHT)[2:-2, 2:-2]


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Largest 8-connected component; ties go to the first in raster order."""
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n <= 1:
        return labels > 0
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def boundary_points(pred: DistanceMap) -> np.ndarray:
    """Skeleton pixels of the decoded boundary fed to the spanning tree."""
    boundary = decode_boundary(pred)
    if not boundary.any():
        raise ReconstructionError("no boundary detected")
    skel = largest_component(skeletonize(close3x3(boundary)))
    ys, xs = np.nonzero(skel)
    return np.stack([xs, ys], axis=1)


def reconstruct_mask(pred: DistanceMap, neighbors: int | None = None) -> np.ndarray:
    """Post-process a predicted distance map into a filled object mask."""
    pts = boundary_points(pred)
    if len(pts) < 3:
        raise ReconstructionError(f"boundary too small to enclose an area ({len(pts)} pixels)")
    path = tree_max_path(mst_kruskal(pts, neighbors))
    h, w = pred.values.shape
    if len(path) < 3:
        raise ReconstructionError("longest tree path has fewer than 3 pixels")
    return close_and_fill(path, w, h)
