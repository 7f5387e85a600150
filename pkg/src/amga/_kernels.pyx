# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused kernels; see ``amga._kernels_py`` for the reference semantics."""
import numpy as np

from cython cimport floating
from libc.math cimport sqrt


def sq_group_means(floating[:, ::1] h, Py_ssize_t[::1] bounds):
    cdef Py_ssize_t n = h.shape[0], d = h.shape[1]
    cdef Py_ssize_t k = bounds.shape[0] - 1
    cdef Py_ssize_t i, j, g, lo, hi
    cdef double v, row, grp, acc, total = 0.0
    dtype = np.float32 if floating is float else np.float64
    local_arr = np.empty(n, dtype=dtype)
    inter_arr = np.empty(n, dtype=dtype)
    cdef floating[::1] local = local_arr
    cdef floating[::1] inter = inter_arr
    with nogil:
        for i in range(n):
            if k < 1:
                row = 0.0
                for j in range(d):
                    v = h[i, j]
                    row += v * v
                local[i] = <floating>(row / d)
                inter[i] = local[i]
            else:
                row = 0.0
                acc = 0.0
                for g in range(k):
                    lo = bounds[g]
                    hi = bounds[g + 1]
                    grp = 0.0
                    for j in range(lo, hi):
                        v = h[i, j]
                        grp += v * v
                    row += grp
                    acc += grp / (hi - lo)
                local[i] = <floating>(row / d)
                inter[i] = <floating>(acc / k)
            total += row
    return local_arr, inter_arr, total


def goodness_grad(floating[:, ::1] h, floating[::1] row_coef, floating[::1] col_coef,
                  double shared, floating[:, ::1] out):
    cdef Py_ssize_t n = h.shape[0], d = h.shape[1]
    cdef Py_ssize_t i, j
    cdef double a
    with nogil:
        for i in range(n):
            a = row_coef[i]
            for j in range(d):
                out[i, j] = <floating>(((a * <double>col_coef[j] + shared) * 2.0) * <double>h[i, j])
    return np.asarray(out)


def bias_relu_(floating[:, ::1] z, floating[::1] b):
    cdef Py_ssize_t n = z.shape[0], d = z.shape[1]
    cdef Py_ssize_t i, j
    cdef floating v
    with nogil:
        for i in range(n):
            for j in range(d):
                v = z[i, j] + b[j]
                z[i, j] = 0 if v < 0 else v
    return np.asarray(z)


def normalize_rows(floating[:, ::1] h, double eps):
    cdef Py_ssize_t n = h.shape[0], d = h.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, v, denom
    out_arr = np.empty((n, d), dtype=np.float32 if floating is float else np.float64)
    cdef floating[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            s = 0.0
            for j in range(d):
                v = h[i, j]
                s += v * v
            denom = sqrt(s) + eps
            for j in range(d):
                out[i, j] = <floating>(<double>h[i, j] / denom)
    return out_arr
