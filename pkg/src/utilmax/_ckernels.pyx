# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path-sample kernels.  Mirrors ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, cosh, expm1, pow, INFINITY

cnp.import_array()

# Young-function codes shared with the Python fallback
cdef enum:
    POWER = 0
    COSH = 1
    EXPABS = 2
    INDICATOR = 3


def maximal_paths(double[:, :, ::1] paths):
    """Running ``S*_t = sum_i max_{s<=t} |S^i_s|`` for paths of shape (n, T+1, d)."""
    cdef Py_ssize_t n = paths.shape[0], m = paths.shape[1], d = paths.shape[2]
    cdef Py_ssize_t k, t, i
    cdef double acc, v
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] run = np.empty(d, dtype=np.float64)
    for k in range(n):
        for i in range(d):
            run[i] = 0.0
        for t in range(m):
            acc = 0.0
            for i in range(d):
                v = fabs(paths[k, t, i])
                if v > run[i]:
                    run[i] = v
                acc += run[i]
            out[k, t] = acc
    return out_arr


def integral_maximal(double[:, :, ::1] increments, double[:, ::1] weights):
    """``(phi . S)*_T = sum_i max_t |sum_{s<=t} phi_s dS^i_s|`` per path."""
    cdef Py_ssize_t n = increments.shape[0], T = increments.shape[1]
    cdef Py_ssize_t d = increments.shape[2]
    cdef Py_ssize_t k, t, i
    cdef double acc, v, w
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] cum = np.empty(d, dtype=np.float64)
    cdef double[::1] run = np.empty(d, dtype=np.float64)
    for k in range(n):
        for i in range(d):
            cum[i] = 0.0
            run[i] = 0.0
        for t in range(T):
            w = weights[k, t]
            for i in range(d):
                cum[i] += w * increments[k, t, i]
                v = fabs(cum[i])
                if v > run[i]:
                    run[i] = v
        acc = 0.0
        for i in range(d):
            acc += run[i]
        out[k] = acc
    return out_arr


def young_mean(int code, double param, double[::1] values, double[::1] weights,
               double scale):
    """``sum_k w_k Psi(values_k / scale)`` for a built-in Young function."""
    cdef Py_ssize_t n = values.shape[0], k
    cdef double total = 0.0, a, psi, inv = 1.0 / scale
    for k in range(n):
        if weights[k] == 0.0:
            continue
        a = fabs(values[k]) * inv
        if code == POWER:
            if param == 2.0:
                psi = a * a
            elif param == 1.0:
                psi = a
            else:
                psi = pow(a, param)
        elif code == COSH:
            psi = cosh(param * a) - 1.0
        elif code == EXPABS:
            psi = expm1(param * a)
        else:
            psi = 0.0 if a <= 1.0 else INFINITY
        total += weights[k] * psi
    return total
