"""Exponential integrals E1..En and Gauss-Legendre quadrature.

The radiation kernels only ever need E_n at arguments 0 <= x <= tau_h
(a few at most), so a short power series below x = 1 and a continued
fraction above cover the whole range at close to machine precision.
Higher orders come from the stable upward recurrence
E_{n+1}(x) = (e^{-x} - x E_n(x)) / n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.5772156649015328606

_SERIES_TERMS = 30
_CF_ITERS = 60
_TINY = 1e-300


def _e1_series(x):
    # E1(x) = -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k k!),  x <= 1
    acc = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * (-x) / k
        acc = acc - term / k
    return -EULER_GAMMA - np.log(x) + acc


def _e1_contfrac(x):
    # E1(x) = e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - 9/(...))))
    # evaluated bottom-up with a fixed depth, ample for x > 1.
    b = x + 2 * _CF_ITERS + 1.0
    for k in range(_CF_ITERS, 0, -1):
        b = x + 2 * k - 1.0 - k * k / b
    return np.exp(-x) / b


def exp_integral(order: int, x) -> np.ndarray | float:
    """Exponential integral E_n(x) for n in {1, 2, 3}, x >= 0.

    Raises ValueError for x < 0, unsupported order, or (n=1, x=0)
    where E1 diverges logarithmically.
    """
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    scalar = np.isscalar(x)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("exp_integral requires x >= 0")
    if order == 1 and np.any(x == 0):
        raise ValueError("E1(0) diverges")
    out = expn_chain(x, order)[order - 1]
    return float(out) if scalar else out


def expn_chain(x, nmax: int) -> np.ndarray:
    """E_1(x)..E_nmax(x) stacked along axis 0; E1 entries at x=0 are +inf."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax,) + x.shape)
    small = x <= 1.0
    e1 = np.empty_like(x)
    xs = np.where(x > 0, x, 1.0)  # dummy to keep log finite
    e1 = np.where(small, _e1_series(np.where(small, xs, 1.0)),
                  _e1_contfrac(np.where(small, 2.0, x)))
    e1 = np.where(x == 0, np.inf, e1)
    out[0] = e1
    emx = np.exp(-x)
    for n in range(1, nmax):
        # x*E_n is 0 at x=0 even though E1 = inf there
        xen = x * np.where(x == 0, 0.0, out[n - 1])
        out[n] = (emx - xen) / n
    return out


def _moment_series(p: int, m: int, x: np.ndarray) -> np.ndarray:
    """F_{p,m}(x) for small x by termwise integration of the E_p series

        E_p(u) = ((-u)^{p-1}/(p-1)!)(psi(p) - ln u)
                 - sum_{k != p-1} (-u)^k / ((k - p + 1) k!)

    Every term scales as x^{m+1} or smaller, so the result keeps full
    relative accuracy even for x ~ 1e-9 where the integration-by-parts
    closed form cancels catastrophically.
    """
    xs = np.where(x > 0, x, 1.0)  # dummy keeps log finite; masked below
    psi = -EULER_GAMMA + sum(1.0 / j for j in range(1, p))
    lead = ((-1.0) ** (p - 1) / math.factorial(p - 1))
    total = lead * xs ** (p + m) * ((psi - np.log(xs)) / (p + m)
                                    + 1.0 / (p + m) ** 2)
    xm1 = xs ** (m + 1)
    term = np.ones_like(xs)  # (-x)^k / k!
    for k in range(_SERIES_TERMS + 10):
        if k != p - 1:
            total = total - term * xm1 / ((k - p + 1) * (k + m + 1))
        term = term * (-xs) / (k + 1)
    return np.where(x > 0, total, 0.0)


def expn_moment(p: int, m: int, x) -> np.ndarray:
    """F_{p,m}(x) = integral_0^x u^m E_p(u) du.

    For x > 1, the closed form via integration by parts:
        F_{p,0}(x) = 1/p - E_{p+1}(x)
        F_{p,m}(x) = -x^m E_{p+1}(x) + m F_{p+1,m-1}(x)
    For x <= 1 this cancels badly (the terms are O(x) but the result is
    O(x^{m+1} ln x)), so a power series is used instead.
    """
    x = np.asarray(x, dtype=float)
    chain = expn_chain(np.where(x > 1.0, x, 2.0), p + m + 1)

    def f(pp, mm):
        e_next = chain[pp]  # E_{pp+1}, chain is 0-indexed at E1
        if mm == 0:
            return 1.0 / pp - e_next
        return -(x ** mm) * e_next + mm * f(pp + 1, mm - 1)

    return np.where(x > 1.0, f(p, m), _moment_series(p, m, np.minimum(x, 1.0)))


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("quadrature nodes must be strictly increasing")

    def mapped(self, a: float, b: float) -> "QuadratureRule":
        """Affine image of the rule on [a, b]."""
        half = 0.5 * (b - a)
        return QuadratureRule(a + half * (self.nodes + 1.0), half * self.weights)


def gauss_legendre(n: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1], exact for polynomials of degree 2n-1."""
    if n < 1:
        raise ValueError("need at least one node")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(nodes, weights)
