"""Dense-tensor primitives shared by every other module.

Two interchangeable backends implement the inner loops: a compiled Cython
extension (''_ckernels'') and a pure-numpy fallback (''_pykernels'').
Selection happens once at import; set MASKMATCH_KERNELS=numpy|cython to
force a backend. The dispatcher normalises dtypes/layout so both backends
see contiguous float64 and callers get their own float dtype back.

All operations are pure functions over immutable inputs; there is no
shared mutable state, so concurrent use is safe.
"""

import os

import numpy as np

_force = os.environ.get("MASKMATCH_KERNELS", "").strip().lower()
if _force == "numpy":
    from . import _pykernels as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        if _force == "cython":
            raise
        from . import _pykernels as _impl

        BACKEND = "numpy"

__all__ = [
    "BACKEND",
    "softmax_rows",
    "resize_bilinear",
    "minmax_normalize",
    "threshold_binarize",
    "masked_select",
    "miou_counts",
    "require_finite",
]


def require_finite(arr, name="tensor"):
    """Reject NaN/Inf at construction points (io boundaries, codec inputs)."""
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _as_f64(arr):
    a = np.asarray(arr)
    out_dtype = a.dtype if a.dtype in (np.float32, np.float64) else np.dtype(np.float64)
    return np.ascontiguousarray(a, dtype=np.float64), out_dtype


def softmax_rows(t, axis=-1):
    """Numerically stable softmax along ``axis``; each slice sums to 1."""
    a, out_dtype = _as_f64(t)
    if a.size == 0:
        raise ValueError("degenerate shape: softmax over empty tensor")
    axis = int(axis)
    if not -a.ndim <= axis < a.ndim:
        raise ValueError(f"axis {axis} out of range for {a.ndim}-d tensor")
    moved = np.moveaxis(a, axis, -1)
    flat = np.ascontiguousarray(moved.reshape(-1, moved.shape[-1]))
    out = np.asarray(_impl.softmax_lastaxis(flat)).reshape(moved.shape)
    return np.moveaxis(out, -1, axis).astype(out_dtype, copy=False)


def resize_bilinear(grid, target):
    """Resize a 2-D map to ``target`` (H, W), half-pixel centers, clamped edges.

    Constant inputs come back constant to machine precision.
    """
    a, out_dtype = _as_f64(grid)
    if a.ndim != 2:
        raise ValueError(f"resize_bilinear expects a 2-D map, got {a.ndim}-d")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError("degenerate shape: empty source grid")
    h, w = int(target[0]), int(target[1])
    if h < 1 or w < 1:
        raise ValueError(f"invalid resize target {(h, w)}")
    out = np.asarray(_impl.resize_bilinear_2d(a, h, w))
    return out.astype(out_dtype, copy=False)


def minmax_normalize(grid):
    """Affinely map values onto [0, 1]; a constant map normalises to all zeros.

    A uniform map carries no localisation signal, so the degenerate case is
    defined as empty rather than full.
    """
    a, out_dtype = _as_f64(grid)
    if a.size == 0:
        return np.asarray(grid, dtype=out_dtype).copy()
    out = np.asarray(_impl.minmax_normalize_flat(np.ascontiguousarray(a.reshape(-1))))
    return out.reshape(a.shape).astype(out_dtype, copy=False)


def threshold_binarize(grid, tau):
    """Binarize at ``tau`` (inclusive: value >= tau -> 1). tau must be in [0, 1]."""
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"threshold tau={tau} outside [0, 1]")
    a, _ = _as_f64(grid)
    out = np.asarray(_impl.threshold_binarize_flat(np.ascontiguousarray(a.reshape(-1)), tau))
    return out.reshape(a.shape)


def masked_select(src, edit, mask):
    """Elementwise blend (1-mask)*src + mask*edit with broadcastable mask."""
    s = np.asarray(src)
    e = np.asarray(edit)
    if s.shape != e.shape:
        raise ValueError(f"shape mismatch: src {s.shape} vs edit {e.shape}")
    try:
        m = np.broadcast_to(np.asarray(mask, dtype=np.float64), s.shape)
    except ValueError:
        raise ValueError(
            f"mask shape {np.asarray(mask).shape} not broadcastable to {s.shape}"
        ) from None
    s64, out_dtype = _as_f64(s)
    e64, _ = _as_f64(e)
    out = np.asarray(
        _impl.lerp_flat(
            np.ascontiguousarray(s64.reshape(-1)),
            np.ascontiguousarray(e64.reshape(-1)),
            np.ascontiguousarray(m.reshape(-1)),
        )
    )
    return out.reshape(s.shape).astype(out_dtype, copy=False)


def miou_counts(a, b):
    """Return (|a & b|, |a | b|) cell counts for two binary grids."""
    aa = np.asarray(a)
    bb = np.asarray(b)
    if aa.shape != bb.shape:
        raise ValueError(f"shape mismatch: {aa.shape} vs {bb.shape}")
    au = np.ascontiguousarray(aa.reshape(-1).astype(np.uint8))
    bu = np.ascontiguousarray(bb.reshape(-1).astype(np.uint8))
    return _impl.mask_counts(au, bu)
