# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pairwise kernel assembly.

Mirrors ``_kernels_py`` function for function; results agree to rounding.
"""

import numpy as np
from libc.math cimport exp


cdef inline double _sqdist(const double[:, ::1] x, const double[:, ::1] y,
                           Py_ssize_t i, Py_ssize_t j, Py_ssize_t k) nogil:
    cdef double acc = 0.0, d
    cdef Py_ssize_t t
    for t in range(k):
        d = x[i, t] - y[j, t]
        acc += d * d
    return acc


cdef inline double _dot(const double[:, ::1] x, const double[:, ::1] y,
                        Py_ssize_t i, Py_ssize_t j, Py_ssize_t k) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t t
    for t in range(k):
        acc += x[i, t] * y[j, t]
    return acc


cdef inline double _ipow(double b, int e) nogil:
    cdef double r = 1.0
    while e > 0:
        if e & 1:
            r *= b
        b *= b
        e >>= 1
    return r


def sqdist(const double[:, ::1] x, const double[:, ::1] y):
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], k = x.shape[1], i, j
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                o[i, j] = _sqdist(x, y, i, j, k)
    return out


def sqdist_sym(const double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1], i, j
    out = np.zeros((n, n))
    cdef double[:, ::1] o = out
    cdef double v
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                v = _sqdist(x, x, i, j, k)
                o[i, j] = v
                o[j, i] = v
    return out


def sqexp_lin(const double[:, ::1] x, const double[:, ::1] y,
              double theta0, double theta1, double theta2):
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], k = x.shape[1], i, j
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                o[i, j] = (theta0 * exp(-theta1 * _sqdist(x, y, i, j, k))
                           + theta2 * _dot(x, y, i, j, k))
    return out


def sqexp_lin_sym(const double[:, ::1] x, double theta0, double theta1, double theta2):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1], i, j
    out = np.empty((n, n))
    cdef double[:, ::1] o = out
    cdef double v
    with nogil:
        for i in range(n):
            o[i, i] = theta0 + theta2 * _dot(x, x, i, i, k)
            for j in range(i + 1, n):
                v = (theta0 * exp(-theta1 * _sqdist(x, x, i, j, k))
                     + theta2 * _dot(x, x, i, j, k))
                o[i, j] = v
                o[j, i] = v
    return out


def poly(const double[:, ::1] x, const double[:, ::1] y, int degree, double offset):
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], k = x.shape[1], i, j
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                o[i, j] = _ipow(_dot(x, y, i, j, k) + offset, degree)
    return out


def poly_sym(const double[:, ::1] x, int degree, double offset):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1], i, j
    out = np.empty((n, n))
    cdef double[:, ::1] o = out
    cdef double v
    with nogil:
        for i in range(n):
            for j in range(i, n):
                v = _ipow(_dot(x, x, i, j, k) + offset, degree)
                o[i, j] = v
                o[j, i] = v
    return out
