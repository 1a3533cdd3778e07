# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython implementations of the dense kernels.

Mirrors _pykernels exactly (same formulas, same float64 accumulation) so
the two backends agree to rounding error. Inputs are contiguous float64
arrays prepared by the dispatcher.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, floor

cnp.import_array()


def softmax_lastaxis(const double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double m, s, v
    for i in range(n):
        m = x[i, 0]
        for j in range(1, k):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(k):
            v = exp(x[i, j] - m)
            o[i, j] = v
            s += v
        for j in range(k):
            o[i, j] /= s
    return out


def resize_bilinear_2d(const double[:, ::1] src, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((out_h, out_w), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, y0, y1, x0, x1
    cdef double sy = h / <double>out_h
    cdef double sx = w / <double>out_w
    cdef double ys, xs, fy, fx, a, b, c, d, top, bottom
    for i in range(out_h):
        ys = (i + 0.5) * sy - 0.5
        if ys < 0.0:
            ys = 0.0
        if ys > h - 1.0:
            ys = h - 1.0
        y0 = <Py_ssize_t>floor(ys)
        y1 = y0 + 1
        if y1 > h - 1:
            y1 = h - 1
        fy = ys - y0
        for j in range(out_w):
            xs = (j + 0.5) * sx - 0.5
            if xs < 0.0:
                xs = 0.0
            if xs > w - 1.0:
                xs = w - 1.0
            x0 = <Py_ssize_t>floor(xs)
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1
            fx = xs - x0
            a = src[y0, x0]
            b = src[y0, x1]
            c = src[y1, x0]
            d = src[y1, x1]
            top = a + fx * (b - a)
            bottom = c + fx * (d - c)
            o[i, j] = top + fy * (bottom - top)
    return out


def minmax_normalize_flat(const double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double lo = x[0], hi = x[0], span
    for i in range(1, n):
        if x[i] < lo:
            lo = x[i]
        if x[i] > hi:
            hi = x[i]
    if hi == lo:
        for i in range(n):
            o[i] = 0.0
        return out
    span = hi - lo
    for i in range(n):
        o[i] = (x[i] - lo) / span
    return out


def threshold_binarize_flat(const double[::1] x, double tau):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.empty(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] o = out
    cdef Py_ssize_t i
    for i in range(n):
        o[i] = 1 if x[i] >= tau else 0
    return out.view(np.bool_)


def lerp_flat(const double[::1] src, const double[::1] edit, const double[::1] mask):
    cdef Py_ssize_t n = src.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(n):
        o[i] = (1.0 - mask[i]) * src[i] + mask[i] * edit[i]
    return out


def mask_counts(const cnp.uint8_t[::1] a, const cnp.uint8_t[::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t inter = 0, union_ = 0
    cdef Py_ssize_t i
    for i in range(n):
        if a[i] and b[i]:
            inter += 1
        if a[i] or b[i]:
            union_ += 1
    return inter, union_
