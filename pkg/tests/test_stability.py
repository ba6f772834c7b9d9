"""Eigenvalue problem, neutral curves, and eigenmode snapshots."""

import numpy as np
import pytest
from scipy.linalg import eig

from photobio import (NoBracket, NumericsConfig, SuspensionParams,
                      assemble_diffuse_operators, eigenmode_snapshots,
                      find_critical, growth_rate, neutral_ra,
                      solve_basic_state, trace_neutral_curve)
from photobio.stability import GAMMA_CAP, assemble, leading_growth_rate

RELAXED = NumericsConfig(picard_relaxation=0.3, picard_max_iter=3000)


@pytest.fixture(scope="module")
def oblique_state():
    params = SuspensionParams(swim_speed=10.0, optical_depth=0.8,
                              albedo=0.8, aniso=0.2,
                              incidence_angle_deg=40.0)
    return solve_basic_state(params, RELAXED)


@pytest.fixture(scope="module")
def unstable_state():
    # configuration with a known finite critical Rayleigh number
    from photobio import calibrate_upsilon
    params = SuspensionParams(swim_speed=20.0, optical_depth=1.0,
                              albedo=0.605, aniso=0.38,
                              incidence_angle_deg=40.0,
                              upsilon=calibrate_upsilon(1.0))
    return solve_basic_state(params, RELAXED)


def finite_spectrum(operator, cap=1e4):
    # restrict to the physically resolved part of the spectrum; the
    # large-magnitude discretization modes are roundoff-dominated
    a_mat, b_mat = operator.a_mat, operator.b_mat
    scale = np.maximum(np.max(np.abs(a_mat), axis=1),
                       np.max(np.abs(b_mat), axis=1))
    vals = eig(a_mat / scale[:, None], b_mat / scale[:, None],
               right=False)
    return vals[np.isfinite(vals) & (np.abs(vals) < cap)]


def max_pairing_distance(spec_a, spec_b):
    """Sup over spec_a of the distance to the nearest member of spec_b."""
    return max(np.min(np.abs(spec_b - v)) for v in spec_a)


class TestSpectralSymmetry:
    def test_conjugate_spectrum_under_wavevector_reflection(self,
                                                            oblique_state):
        a = 2.0
        spec_plus = finite_spectrum(assemble(
            oblique_state, assemble_diffuse_operators(oblique_state, a),
            a, rayleigh=400.0))
        spec_minus = finite_spectrum(assemble(
            oblique_state, assemble_diffuse_operators(oblique_state, -a),
            -a, rayleigh=400.0))
        scale = np.max(np.abs(spec_plus))
        assert len(spec_plus) == len(spec_minus)
        assert (max_pairing_distance(spec_plus, np.conj(spec_minus))
                < 1e-10 * scale)

    def test_spectrum_is_self_conjugate(self, oblique_state):
        # the pencil is real: complex eigenvalues come in conjugate pairs
        a = 2.0
        spec = finite_spectrum(assemble(
            oblique_state, assemble_diffuse_operators(oblique_state, a),
            a, rayleigh=400.0))
        scale = np.max(np.abs(spec))
        assert max_pairing_distance(spec, np.conj(spec)) < 1e-10 * scale


class TestDecoupledLimits:
    def test_no_swimming_concentration_mode(self):
        # Us = 0: the concentration equation decouples and its slowest
        # mode with no-flux walls decays at exactly the diffusive rate
        state = solve_basic_state(SuspensionParams(swim_speed=0.0,
                                                   albedo=0.5))
        for a in (0.7, 2.0):
            mode = growth_rate(state, a, 300.0)
            assert mode.gamma == pytest.approx(-a * a, rel=1e-8)

    def test_always_stable_profile_has_no_neutral_point(self):
        state = solve_basic_state(SuspensionParams(swim_speed=0.0,
                                                   albedo=0.5))
        with pytest.raises(NoBracket):
            neutral_ra(state, 2.0, ra_bracket=(10.0, 1e4))


class TestEigenpairQuality:
    def test_residuals_small(self, oblique_state):
        ops = assemble_diffuse_operators(oblique_state, 2.0)
        operator = assemble(oblique_state, ops, 2.0, rayleigh=400.0)
        mode = leading_growth_rate(operator)
        assert mode.residual < 1e-8
        assert mode.bc_residual(operator) < 1e-8

    def test_normalization(self, oblique_state):
        mode = growth_rate(oblique_state, 2.0, 400.0)
        assert np.max(np.abs(mode.n_hat)) == pytest.approx(1.0, rel=1e-12)

    def test_sign_change_across_neutral_rayleigh(self, unstable_state):
        point = neutral_ra(unstable_state, 2.5)
        below = growth_rate(unstable_state, 2.5, 0.8 * point.ra)
        above = growth_rate(unstable_state, 2.5, 1.2 * point.ra)
        assert below.gamma.real < 0.0 < above.gamma.real


class TestNeutralCurve:
    def test_neutral_point_idempotence(self, unstable_state):
        point = neutral_ra(unstable_state, 2.5)
        mode = growth_rate(unstable_state, 2.5, point.ra)
        assert abs(mode.gamma.real) < 1e-3

    def test_trace_and_critical(self, unstable_state):
        curve = trace_neutral_curve(unstable_state, a_range=(2.0, 3.2),
                                    n_points=4)
        a_vals = [p.a for p in curve.points]
        assert a_vals == sorted(a_vals)
        assert all(p.branch in ("stationary", "oscillatory")
                   for p in curve.points)
        crit = find_critical(unstable_state, curve=curve)
        assert crit.ra_c <= min(p.ra for p in curve.points) + 1e-6
        assert crit.wavelength == pytest.approx(2 * np.pi / crit.a_c,
                                                rel=1e-12)


@pytest.fixture(scope="module")
def oscillatory_mode():
    from photobio import calibrate_upsilon
    params = SuspensionParams(schmidt=0.8, swim_speed=8.0,
                              optical_depth=0.75, albedo=0.0,
                              aniso=0.0, upsilon=calibrate_upsilon(0.67))
    state = solve_basic_state(params, RELAXED)
    return growth_rate(state, 1.3, 1400.0), 1.3


class TestSnapshots:
    def test_requires_oscillatory_mode(self, oblique_state):
        mode = growth_rate(oblique_state, 2.0, 400.0)
        assert abs(mode.gamma.imag) < 1e-10
        with pytest.raises(ValueError):
            eigenmode_snapshots(mode, 2.0)

    def test_cycle_closes(self, oscillatory_mode):
        mode, a = oscillatory_mode
        x1, times, w_fields, n_fields = eigenmode_snapshots(mode, a)
        assert len(times) == 5
        assert np.max(np.abs(w_fields[0] - w_fields[-1])) < 1e-8
        assert np.max(np.abs(n_fields[0] - n_fields[-1])) < 1e-8

    def test_half_period_flips_sign_of_standing_factor(self,
                                                       oscillatory_mode):
        # exp(i Im(gamma) T/2) = -1: the half-period snapshot is the
        # initial one with reversed sign
        mode, a = oscillatory_mode
        _, _, w_fields, _ = eigenmode_snapshots(
            mode, a, fractions=(0.0, 0.5))
        assert np.max(np.abs(w_fields[0] + w_fields[1])) < 1e-8

    def test_domain_spans_one_wavelength(self, oscillatory_mode):
        mode, a = oscillatory_mode
        x1, _, w_fields, _ = eigenmode_snapshots(mode, a, n_x1=32)
        assert x1[0] == 0.0
        assert x1[-1] == pytest.approx(2 * np.pi / a, rel=1e-12)
        assert w_fields[0].shape == (len(mode.w_hat), 32)
        # periodic horizontal direction: the end column repeats the start
        assert np.allclose(w_fields[0][:, 0], w_fields[0][:, -1],
                           atol=1e-10)
