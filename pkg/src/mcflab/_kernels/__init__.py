"""Kernel backend selection.

The compiled extension (Cython) is preferred; the pure-numpy fallback is
used when the extension is unavailable or MCFLAB_PURE_PYTHON=1 is set.
Both expose the same functions with identical semantics.
"""

import os

import numpy as np

from . import _fallback

if os.environ.get("MCFLAB_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _native as _impl
        BACKEND = "native"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

curvature_motion_step = _impl.curvature_motion_step
reinit_steps = _impl.reinit_steps
z_extrema_bruteforce = _impl.z_extrema_bruteforce
z_extrema_pruned = _impl.z_extrema_pruned


def build_cell_grid(pts, cell_size):
    """Group points into uniform grid cells for the pruned pair search.

    Returns (order, starts, box_lo, box_hi): CSR-style vertex indices per
    nonempty cell plus each cell's tight member bounding box.
    """
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    lo = pts.min(axis=0)
    key = np.floor((pts - lo) / cell_size).astype(np.int64)
    dims = key.max(axis=0) + 1
    flat = (key[:, 0] * dims[1] + key[:, 1]) * dims[2] + key[:, 2]
    order = np.argsort(flat, kind="stable")
    sorted_flat = flat[order]
    boundaries = np.flatnonzero(np.diff(sorted_flat)) + 1
    starts = np.concatenate(([0], boundaries, [pts.shape[0]])).astype(np.int64)
    ncell = starts.shape[0] - 1
    box_lo = np.empty((ncell, 3))
    box_hi = np.empty((ncell, 3))
    for c in range(ncell):
        member_pts = pts[order[starts[c]:starts[c + 1]]]
        box_lo[c] = member_pts.min(axis=0)
        box_hi[c] = member_pts.max(axis=0)
    return order, starts, box_lo, box_hi
