"""Hot inner loops: thinning, union-find, tree traversal, line rasterization.

The compiled Cython module is used when it was built and importable; the
numpy/pure-Python fallback is used otherwise, or when the environment
variable ``BDSEG_PURE_PYTHON=1`` is set before import.
"""
import os

from . import _pykernels as python

compiled = None
if os.environ.get("BDSEG_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

active = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

zhang_suen = active.zhang_suen
kruskal = active.kruskal
tree_distances = active.tree_distances
draw_lines = active.draw_lines


def backends():
    """Mapping of available backend name -> kernel module."""
    out = {"python": python}
    if compiled is not None:
        out["cython"] = compiled
    return out
