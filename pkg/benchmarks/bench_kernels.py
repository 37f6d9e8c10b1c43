"""Compare the compiled and pure-Python kernel backends.

Run ``python benchmarks/bench_kernels.py``. Each kernel runs on the same
inputs with both backends; outputs are checked for equality and the best of
several repeats is reported, together with a full ``reconstruct_mask`` pass
at 64x64 and 321x321.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from bdseg import _kernels, contour, synth
from bdseg import distance_map as dm


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def kernel_inputs(size):
    item = synth.gen_shape(synth.ShapeParams(size=size), 0)
    band = contour.close3x3(dm.decode_boundary(dm.encode_mask(item.mask, 1.0)))
    pts = contour.boundary_points(dm.encode_mask(item.mask, 1.0))
    nodes = contour._sorted_nodes(pts)
    i, j, d2 = contour._complete_edges(nodes)
    order = np.lexsort((j, i, d2))
    tree = contour.mst_kruskal(pts)
    indptr, indices, weights = contour._csr(tree)
    path = contour.tree_max_path(tree).points
    return item, {
        "zhang_suen": (band.astype(np.uint8),),
        "kruskal": (len(nodes), i[order], j[order]),
        "tree_distances": (indptr, indices, weights, 0),
        "draw_lines": (path, True, size, size),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 321])
    args = ap.parse_args(argv)
    backends = _kernels.backends()
    if "cython" not in backends:
        print("compiled backend not built; only the Python backend is available")
    names = list(backends)
    print(f"{'kernel':<22}{'size':>6}" + "".join(f"{n + ' (s)':>14}" for n in names) + f"{'speedup':>10}")
    for size in args.sizes:
        item, inputs = kernel_inputs(size)
        for kname, kargs in inputs.items():
            times, outs = [], []
            for b in names:
                fn = getattr(backends[b], kname)
                outs.append(fn(*kargs))
                times.append(best_of(lambda: fn(*kargs), args.repeats))
            for o in outs[1:]:
                assert same(outs[0], o), f"{kname}: backends disagree"
            speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
            print(f"{kname:<22}{size:>6}" + "".join(f"{t:>14.6f}" for t in times) + speed)
        pred = dm.encode_mask(item.mask, 1.0)
        times = []
        for b in names:
            mod = backends[b]
            saved = {k: getattr(_kernels, k) for k in ("zhang_suen", "kruskal", "tree_distances", "draw_lines")}
            for k in saved:
                setattr(_kernels, k, getattr(mod, k))
            try:
                times.append(best_of(lambda: contour.reconstruct_mask(pred), args.repeats))
            finally:
                for k, v in saved.items():
                    setattr(_kernels, k, v)
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{'reconstruct_mask':<22}{size:>6}" + "".join(f"{t:>14.6f}" for t in times) + speed)


if __name__ == "__main__":
    main()
