"""Pure-numpy implementations of the dense kernels.

Same contracts as the Cython module; the dispatcher in ``__init__`` picks
whichever is importable and hands both backends contiguous float64.
"""

import numpy as np


def softmax_lastaxis(x):
    # x: (N, K) float64, contiguous. Max-subtraction for stability.
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def resize_bilinear_2d(src, out_h, out_w):
    # Half-pixel sample centers, edges clamped. Lerp form keeps constant
    # inputs exact: v0 + f*(v1-v0) == v0 when v0 == v1.
    h, w = src.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]

    a = src[np.ix_(y0, x0)]
    b = src[np.ix_(y0, x1)]
    c = src[np.ix_(y1, x0)]
    d = src[np.ix_(y1, x1)]
    top = a + fx * (b - a)
    bottom = c + fx * (d - c)
    return top + fy * (bottom - top)


def minmax_normalize_flat(x):
    lo = x.min()
    hi = x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def threshold_binarize_flat(x, tau):
    return x >= tau


def lerp_flat(src, edit, mask):
    return (1.0 - mask) * src + mask * edit


def mask_counts(a, b):
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    return inter, union
