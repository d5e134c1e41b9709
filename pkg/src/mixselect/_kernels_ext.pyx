# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ARD squared-exponential Gram kernels.

Entry (i, l) accumulates ``rho[j] * d * d`` over j in ascending order and
then applies ``tau2 * exp(-s)``, the same order as the numpy fallback.
"""
import numpy as np

from libc.math cimport exp


def ard_gram(const double[:, ::1] X, const double[::1] rho, double tau2):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t i, l, j
    cdef double s, d, v
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            o[i, i] = tau2
            for l in range(i + 1, n):
                s = 0.0
                for j in range(p):
                    d = X[i, j] - X[l, j]
                    s = s + rho[j] * d * d
                v = tau2 * exp(-s)
                o[i, l] = v
                o[l, i] = v
    return out


def ard_cross(const double[:, ::1] A, const double[:, ::1] B,
              const double[::1] rho, double tau2):
    cdef Py_ssize_t na = A.shape[0]
    cdef Py_ssize_t nb = B.shape[0]
    cdef Py_ssize_t p = A.shape[1]
    cdef Py_ssize_t i, l, j
    cdef double s, d
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(na):
            for l in range(nb):
                s = 0.0
                for j in range(p):
                    d = A[i, j] - B[l, j]
                    s = s + rho[j] * d * d
                o[i, l] = tau2 * exp(-s)
    return out
