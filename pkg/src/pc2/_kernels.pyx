# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for orthonormal-basis evaluation.

Mirrors ``pc2._kernels_py`` exactly; both are exercised by the test suite.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def recurrence_table(const double[::1] x, const double[::1] b, int max_degree,
                     int max_order):
    """Orthonormal polynomials and derivatives from the Jacobi recurrence.

    ``x p_k = b[k+1] p_{k+1} + b[k] p_{k-1}`` with ``p_0 = 1``.  Returns an
    array of shape ``(max_order + 1, len(x), max_degree + 1)``.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, k, m
    cdef double xi, prev
    out = np.zeros((max_order + 1, n, max_degree + 1), dtype=np.float64)
    cdef double[:, :, ::1] t = out
    for i in range(n):
        xi = x[i]
        t[0, i, 0] = 1.0
        if max_degree >= 1:
            t[0, i, 1] = xi / b[1]
        for k in range(1, max_degree):
            t[0, i, k + 1] = (xi * t[0, i, k] - b[k] * t[0, i, k - 1]) / b[k + 1]
        for m in range(1, max_order + 1):
            if max_degree >= 1:
                t[m, i, 1] = (m * t[m - 1, i, 0] + xi * t[m, i, 0]) / b[1]
            for k in range(1, max_degree):
                t[m, i, k + 1] = (xi * t[m, i, k] + m * t[m - 1, i, k]
                                  - b[k] * t[m, i, k - 1]) / b[k + 1]
    return out


def tensor_design(const double[:, :, :, ::1] tables, const long[:, ::1] indices,
                  const long[::1] orders, double scale):
    """Fused tensor-product assembly.

    ``out[i, j] = scale * prod_d tables[d, orders[d], i, indices[j, d]]``.
    """
    cdef Py_ssize_t ndim = tables.shape[0]
    cdef Py_ssize_t n = tables.shape[2]
    cdef Py_ssize_t nb = indices.shape[0]
    cdef Py_ssize_t i, j, d
    cdef double acc
    out = np.empty((n, nb), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(nb):
            acc = scale
            for d in range(ndim):
                acc = acc * tables[d, orders[d], i, indices[j, d]]
            o[i, j] = acc
    return out
