"""Pure-Python/numpy implementations of the hot kernels.

Same signatures and bit-identical results as the compiled ``_ckernels``.
"""
from __future__ import annotations

import numpy as np


def _neighbours(a):
    """P2..P9 (N, NE, E, SE, S, SW, W, NW) views of the interior of padded ``a``."""
    return (a[:-2, 1:-1], a[:-2, 2:], a[1:-1, 2:], a[2:, 2:],
            a[2:, 1:-1], a[2:, :-2], a[1:-1, :-2], a[:-2, :-2])


def _deletable(a, y, x, sub) -> bool:
    p2, p3, p4, p5 = a[y - 1, x], a[y - 1, x + 1], a[y, x + 1], a[y + 1, x + 1]
    p6, p7, p8, p9 = a[y + 1, x], a[y + 1, x - 1], a[y, x - 1], a[y - 1, x - 1]
    b = int(p2) + p3 + p4 + p5 + p6 + p7 + p8 + p9
    if b < 2 or b > 6:
        return False
    ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
    if sum(1 for i in range(8) if ring[i] == 0 and ring[i + 1] == 1) != 1:
        return False
    if sub == 0:
        return p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
    return p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0


def zhang_suen(img: np.ndarray) -> np.ndarray:
    """Zhang-Suen thinning of a 0/1 image; pixels off-image are 0.

    Each sub-iteration finds the Zhang-Suen candidates in parallel, then
    deletes them in raster order, re-checking each against the partly
    updated image. The re-check keeps 2x2 blocks and 2-pixel diagonals from
    vanishing, so the number of 8-connected components is preserved.
    """
    a = np.pad((np.asarray(img) != 0).astype(np.uint8), 1)
    while True:
        changed = False
        for sub in (0, 1):
            p2, p3, p4, p5, p6, p7, p8, p9 = (v.astype(np.int32) for v in _neighbours(a))
            ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
            b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
            trans = sum(((ring[i] == 0) & (ring[i + 1] == 1)).astype(np.int32) for i in range(8))
            if sub == 0:
                c = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
            else:
                c = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
            cand = (a[1:-1, 1:-1] == 1) & (b >= 2) & (b <= 6) & (trans == 1) & c
            for y, x in zip(*np.nonzero(cand)):
                if _deletable(a, y + 1, x + 1, sub):
                    a[y + 1, x + 1] = 0
                    changed = True
        if not changed:
            return a[1:-1, 1:-1].copy()


def kruskal(n: int, ei: np.ndarray, ej: np.ndarray) -> np.ndarray:
    """Union-find pass over edges already sorted by weight.

    Returns the indices of the accepted edges (at most ``n - 1``).
    """
    parent = list(range(n))
    rank = [0] * n

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    chosen = []
    for e in range(len(ei)):
        if len(chosen) == n - 1:
            break
        ri, rj = find(int(ei[e])), find(int(ej[e]))
        if ri == rj:
            continue
        if rank[ri] < rank[rj]:
            ri, rj = rj, ri
        parent[rj] = ri
        if rank[ri] == rank[rj]:
            rank[ri] += 1
        chosen.append(e)
    return np.asarray(chosen, dtype=np.int64)


def tree_distances(indptr, indices, weights, start: int):
    """Weighted distance and parent of every node from ``start`` in a tree (CSR)."""
    n = len(indptr) - 1
    dist = np.full(n, -1.0)
    parent = np.full(n, -1, dtype=np.int64)
    dist[start] = 0.0
    stack = [start]
    while stack:
        u = stack.pop()
        for k in range(indptr[u], indptr[u + 1]):
            v = int(indices[k])
            if dist[v] < 0:
                dist[v] = dist[u] + weights[k]
                parent[v] = u
                stack.append(v)
    return dist, parent


def draw_lines(pts: np.ndarray, closed: bool, h: int, w: int) -> np.ndarray:
    """Bresenham segments between consecutive ``(x, y)`` points (clipped to image)."""
    out = np.zeros((h, w), dtype=np.uint8)
    n = len(pts)
    segs = n if closed and n > 1 else n - 1
    if n == 1:
        segs = 0
        x, y = int(pts[0, 0]), int(pts[0, 1])
        if 0 <= x < w and 0 <= y < h:
            out[y, x] = 1
    for s in range(segs):
        x0, y0 = int(pts[s, 0]), int(pts[s, 1])
        x1, y1 = int(pts[(s + 1) % n, 0]), int(pts[(s + 1) % n, 1])
        dx, dy = abs(x1 - x0), -abs(y1 - y0)
        sx = 1 if x0 < x1 else -1
        sy = 1 if y0 < y1 else -1
        err = dx + dy
        while True:
            if 0 <= x0 < w and 0 <= y0 < h:
                out[y0, x0] = 1
            if x0 == x1 and y0 == y1:
                break
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x0 += sx
            if e2 <= dx:
                err += dx
                y0 += sy
    return out
