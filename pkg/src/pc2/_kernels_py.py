"""Pure-NumPy fallback for :mod:`pc2._kernels`.

The signatures and floating-point operation order match the compiled
kernels, so results agree bit for bit on the same platform.
"""

import numpy as np


def recurrence_table(x, b, max_degree, max_order):
    x = np.ascontiguousarray(x, dtype=np.float64)
    t = np.zeros((max_order + 1, x.shape[0], max_degree + 1))
    t[0, :, 0] = 1.0
    if max_degree >= 1:
        t[0, :, 1] = x / b[1]
    for k in range(1, max_degree):
        t[0, :, k + 1] = (x * t[0, :, k] - b[k] * t[0, :, k - 1]) / b[k + 1]
    for m in range(1, max_order + 1):
        if max_degree >= 1:
            t[m, :, 1] = (m * t[m - 1, :, 0] + x * t[m, :, 0]) / b[1]
        for k in range(1, max_degree):
            t[m, :, k + 1] = (x * t[m, :, k] + m * t[m - 1, :, k]
                              - b[k] * t[m, :, k - 1]) / b[k + 1]
    return t


def tensor_design(tables, indices, orders, scale):
    ndim, _, n, _ = tables.shape
    out = np.full((n, indices.shape[0]), float(scale))
    for d in range(ndim):
        out *= tables[d, orders[d]][:, indices[:, d]]
    return out
