"""Exponential integrals, their moments, and quadrature rules."""

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from photobio.special import (QuadratureRule, exp_integral, expn_chain,
                              expn_moment, gauss_legendre)


class TestExpIntegral:
    def test_matches_reference_implementation(self):
        # independent oracle: scipy.special.expn
        x = np.concatenate([np.geomspace(1e-8, 1.0, 40),
                            np.linspace(1.0, 30.0, 40)])
        for order in (1, 2, 3):
            ours = exp_integral(order, x)
            ref = scipy.special.expn(order, x)
            assert np.max(np.abs(ours - ref) / np.maximum(ref, 1e-300)) < 5e-14

    def test_scalar_round_trip(self):
        val = exp_integral(2, 0.5)
        assert isinstance(val, float)
        assert val == pytest.approx(scipy.special.expn(2, 0.5), rel=1e-13)

    def test_value_at_zero(self):
        # E2(0) = 1, E3(0) = 1/2 exactly
        assert exp_integral(2, 0.0) == pytest.approx(1.0, abs=1e-15)
        assert exp_integral(3, 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_e1_diverges_at_zero(self):
        with pytest.raises(ValueError):
            exp_integral(1, 0.0)

    def test_rejects_negative_argument(self):
        with pytest.raises(ValueError):
            exp_integral(2, -0.1)

    def test_rejects_unsupported_order(self):
        with pytest.raises(ValueError):
            exp_integral(4, 1.0)

    @given(st.floats(min_value=1e-6, max_value=20.0))
    @settings(max_examples=50, deadline=None)
    def test_recurrence_between_orders(self, x):
        # (n) E_{n+1}(x) = e^{-x} - x E_n(x)
        chain = expn_chain(np.array([x]), 3)
        e1, e2, e3 = (float(c[0]) for c in chain)
        assert e2 == pytest.approx(np.exp(-x) - x * e1, rel=1e-12, abs=1e-14)
        assert 2 * e3 == pytest.approx(np.exp(-x) - x * e2,
                                       rel=1e-12, abs=1e-14)

    @given(st.floats(min_value=0.01, max_value=10.0),
           st.floats(min_value=0.01, max_value=10.0))
    @settings(max_examples=30, deadline=None)
    def test_monotone_decreasing(self, x1, x2):
        lo, hi = sorted((x1, x2))
        for order in (1, 2, 3):
            assert exp_integral(order, lo) >= exp_integral(order, hi)


class TestExpnMoment:
    @pytest.mark.parametrize("p", [1, 2, 3])
    @pytest.mark.parametrize("m", [0, 1, 2])
    @pytest.mark.parametrize("x", [0.03, 0.4, 1.0, 2.5, 8.0])
    def test_against_arbitrary_precision_quadrature(self, p, m, x):
        # independent oracle: mpmath adaptive quadrature at 30 digits
        # (scipy.integrate.quad loses ~8 digits at the integrable
        # endpoint singularity for small x)
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 30
        val = float(mp.quad(lambda u: u ** m * mp.expint(p, u), [0, x]))
        assert expn_moment(p, m, x) == pytest.approx(val, rel=1e-12,
                                                     abs=1e-16)

    def test_tiny_argument_keeps_relative_accuracy(self):
        # F_{2,0}(x) ~ x for x -> 0 (E2(0) = 1); the closed form would
        # cancel catastrophically here
        x = 1e-9
        val = float(expn_moment(2, 0, x))
        assert val == pytest.approx(x, rel=1e-5)

    def test_zero_argument(self):
        assert float(expn_moment(1, 0, 0.0)) == 0.0


class TestQuadrature:
    def test_gauss_legendre_polynomial_exactness(self):
        rule = gauss_legendre(8)
        for deg in range(16):   # exact through degree 2n-1
            integral = np.sum(rule.weights * rule.nodes ** deg)
            exact = (1.0 - (-1.0) ** (deg + 1)) / (deg + 1)
            assert integral == pytest.approx(exact, abs=1e-13)

    def test_mapped_interval(self):
        rule = gauss_legendre(6).mapped(0.0, 2.0)
        assert np.all(rule.nodes > 0.0) and np.all(rule.nodes < 2.0)
        assert np.sum(rule.weights) == pytest.approx(2.0, rel=1e-14)
        assert np.sum(rule.weights * rule.nodes ** 3) == pytest.approx(
            4.0, rel=1e-13)

    def test_rejects_non_increasing_nodes(self):
        with pytest.raises(ValueError):
            QuadratureRule(np.array([0.5, 0.2]), np.array([1.0, 1.0]))

    def test_rejects_empty_rule(self):
        with pytest.raises(ValueError):
            gauss_legendre(0)
