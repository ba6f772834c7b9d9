"""Finite-difference differentiation matrices of arbitrary order.

Weights come from Fornberg's recurrence, which gives the exact
interpolatory weights for any derivative order on any node stencil.
Interior rows use centered stencils; rows near the walls slide the
stencil inward (one-sided closures) keeping the same formal accuracy.
"""

from __future__ import annotations

import numpy as np


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Weights w such that f^(k)(z) ~ w[k] @ f(x) for k = 0..m."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if m >= n:
        raise ValueError("need more nodes than the derivative order")
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c.T  # shape (m+1, n)


def diff_matrix(n: int, h: float, order: int, accuracy: int = 4) -> np.ndarray:
    """Dense n x n matrix approximating d^order/dx^order on a uniform
    grid of spacing h, with the requested formal order of accuracy
    (one-sided stencils of the same accuracy at the boundaries)."""
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    npts = order + accuracy
    if npts > n:
        raise ValueError(f"need at least {npts} grid points")
    d = np.zeros((n, n))
    x = np.arange(n, dtype=float) * h
    cache: dict[int, np.ndarray] = {}
    for i in range(n):
        s = min(max(i - npts // 2, 0), n - npts)
        offset = i - s
        if offset not in cache:
            cache[offset] = fornberg_weights(x[i], x[s:s + npts], order)[order]
        d[i, s:s + npts] = cache[offset]
    return d
