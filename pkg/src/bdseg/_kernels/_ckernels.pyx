# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Results match ``_pykernels`` exactly."""
import numpy as np

from libc.stdint cimport int64_t, uint8_t


cdef inline bint _deletable(uint8_t[:, ::1] a, Py_ssize_t y, Py_ssize_t x, int sub) noexcept:
    cdef int p2 = a[y - 1, x], p3 = a[y - 1, x + 1], p4 = a[y, x + 1], p5 = a[y + 1, x + 1]
    cdef int p6 = a[y + 1, x], p7 = a[y + 1, x - 1], p8 = a[y, x - 1], p9 = a[y - 1, x - 1]
    cdef int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
    cdef int t
    if b < 2 or b > 6:
        return False
    t = ((p2 == 0 and p3 == 1) + (p3 == 0 and p4 == 1) + (p4 == 0 and p5 == 1)
         + (p5 == 0 and p6 == 1) + (p6 == 0 and p7 == 1) + (p7 == 0 and p8 == 1)
         + (p8 == 0 and p9 == 1) + (p9 == 0 and p2 == 1))
    if t != 1:
        return False
    if sub == 0:
        return p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
    return p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0


def zhang_suen(img):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    padded = np.zeros((h + 2, w + 2), dtype=np.uint8)
    padded[1:-1, 1:-1] = np.asarray(img) != 0
    cand_buf = np.empty(h * w, dtype=np.int64)
    cdef uint8_t[:, ::1] a = padded
    cdef int64_t[::1] cand = cand_buf
    cdef Py_ssize_t y, x, k, ncand
    cdef int sub, changed
    while True:
        changed = 0
        for sub in range(2):
            ncand = 0
            for y in range(1, h + 1):
                for x in range(1, w + 1):
                    if a[y, x] != 0 and _deletable(a, y, x, sub):
                        cand[ncand] = y * (w + 2) + x
                        ncand += 1
            # sequential re-check keeps 2x2 blocks from vanishing
            for k in range(ncand):
                y = cand[k] // (w + 2)
                x = cand[k] % (w + 2)
                if _deletable(a, y, x, sub):
                    a[y, x] = 0
                    changed = 1
        if not changed:
            return padded[1:-1, 1:-1].copy()


cdef inline int64_t _find(int64_t[::1] parent, int64_t x) noexcept:
    cdef int64_t root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def kruskal(Py_ssize_t n, ei, ej):
    cdef int64_t[::1] ci = np.ascontiguousarray(ei, dtype=np.int64)
    cdef int64_t[::1] cj = np.ascontiguousarray(ej, dtype=np.int64)
    parent_arr = np.arange(n, dtype=np.int64)
    rank_arr = np.zeros(n, dtype=np.int64)
    chosen_arr = np.empty(max(n - 1, 0), dtype=np.int64)
    cdef int64_t[::1] parent = parent_arr
    cdef int64_t[::1] rank = rank_arr
    cdef int64_t[::1] chosen = chosen_arr
    cdef Py_ssize_t e, m = ci.shape[0], cnt = 0
    cdef int64_t ri, rj, tmp
    for e in range(m):
        if cnt == n - 1:
            break
        ri = _find(parent, ci[e])
        rj = _find(parent, cj[e])
        if ri == rj:
            continue
        if rank[ri] < rank[rj]:
            tmp = ri
            ri = rj
            rj = tmp
        parent[rj] = ri
        if rank[ri] == rank[rj]:
            rank[ri] += 1
        chosen[cnt] = e
        cnt += 1
    return chosen_arr[:cnt].copy()


def tree_distances(indptr, indices, weights, Py_ssize_t start):
    cdef int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef int64_t[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = ip.shape[0] - 1
    dist_arr = np.full(n, -1.0)
    parent_arr = np.full(n, -1, dtype=np.int64)
    stack_arr = np.empty(max(n, 1), dtype=np.int64)
    cdef double[::1] dist = dist_arr
    cdef int64_t[::1] parent = parent_arr
    cdef int64_t[::1] stack = stack_arr
    cdef Py_ssize_t top = 0, k
    cdef int64_t u, v
    dist[start] = 0.0
    stack[0] = start
    top = 1
    while top > 0:
        top -= 1
        u = stack[top]
        for k in range(ip[u], ip[u + 1]):
            v = ix[k]
            if dist[v] < 0:
                dist[v] = dist[u] + wt[k]
                parent[v] = u
                stack[top] = v
                top += 1
    return dist_arr, parent_arr


def draw_lines(pts, bint closed, Py_ssize_t h, Py_ssize_t w):
    cdef int64_t[:, ::1] p = np.ascontiguousarray(pts, dtype=np.int64)
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef uint8_t[:, ::1] out = out_arr
    cdef Py_ssize_t n = p.shape[0], s, segs
    cdef int64_t x0, y0, x1, y1, dx, dy, sx, sy, err, e2
    if n == 1:
        if 0 <= p[0, 0] < w and 0 <= p[0, 1] < h:
            out[p[0, 1], p[0, 0]] = 1
        return out_arr
    segs = n if closed else n - 1
    for s in range(segs):
        x0 = p[s, 0]
        y0 = p[s, 1]
        x1 = p[(s + 1) % n, 0]
        y1 = p[(s + 1) % n, 1]
        dx = x1 - x0 if x1 >= x0 else x0 - x1
        dy = -(y1 - y0 if y1 >= y0 else y0 - y1)
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
    return out_arr
