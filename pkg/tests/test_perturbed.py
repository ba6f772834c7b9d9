"""Wavenumber-dependent radiation response operators."""

import numpy as np
import pytest

from photobio import (NumericsConfig, SuspensionParams,
                      assemble_diffuse_operators, solve_basic_state)
from photobio.perturbed import build_ordinates, perturbed_collimated_map

RELAXED = NumericsConfig(picard_relaxation=0.3, picard_max_iter=3000)


@pytest.fixture(scope="module")
def scattering_state():
    params = SuspensionParams(swim_speed=10.0, optical_depth=0.8,
                              albedo=0.8, aniso=0.2,
                              incidence_angle_deg=40.0)
    return solve_basic_state(params, RELAXED)


@pytest.fixture(scope="module")
def absorbing_state():
    params = SuspensionParams(swim_speed=10.0, optical_depth=0.8,
                              albedo=0.0, aniso=0.0,
                              incidence_angle_deg=40.0)
    return solve_basic_state(params, RELAXED)


class TestOrdinates:
    def test_weights_integrate_sphere(self):
        rule = build_ordinates(16, 16)
        # vertical-cosine weights integrate 1 over (0, 1); azimuth
        # weights cover the full circle via the quarter-circle folding
        assert np.sum(rule.mu_weights) == pytest.approx(1.0, rel=1e-12)
        assert np.sum(rule.zeta_weights) == pytest.approx(2.0 * np.pi,
                                                          rel=1e-12)

    def test_azimuths_in_quarter_circle(self):
        rule = build_ordinates(8, 8)
        assert np.all(rule.zeta_nodes > 0.0)
        assert np.all(rule.zeta_nodes < np.pi / 2)


class TestExactInvariants:
    def test_transverse_flux_identically_zero(self, scattering_state):
        ops = assemble_diffuse_operators(scattering_state, 1.5)
        assert np.max(np.abs(ops.map_q2)) < 1e-12

    def test_in_plane_flux_vanishes_at_zero_wavenumber(self,
                                                       scattering_state):
        ops = assemble_diffuse_operators(scattering_state, 0.0)
        assert np.max(np.abs(ops.map_q1)) < 1e-12

    def test_in_plane_flux_map_is_imaginary(self, scattering_state):
        # horizontal structure cos(a x1): the in-plane flux is a sine
        # mode, i.e. the operator on N-samples is purely imaginary
        ops = assemble_diffuse_operators(scattering_state, 2.0)
        assert np.max(np.abs(ops.map_q1.real)) < 1e-12

    def test_intensity_maps_are_real(self, scattering_state):
        ops = assemble_diffuse_operators(scattering_state, 2.0)
        assert np.max(np.abs(ops.map_Gd.imag)) < 1e-12
        assert np.max(np.abs(ops.map_q3.imag)) < 1e-12


class TestAbsorbingLimit:
    def test_no_diffuse_response(self, absorbing_state):
        ops = assemble_diffuse_operators(absorbing_state, 1.0)
        assert np.max(np.abs(ops.map_Gd)) < 1e-12
        assert np.max(np.abs(ops.map_q1)) < 1e-12
        # total vertical flux response reduces to the collimated part
        _, q3_c = perturbed_collimated_map(absorbing_state)
        assert np.max(np.abs(ops.map_q3 - q3_c)) < 1e-12

    def test_collimated_map_closed_form(self, absorbing_state):
        map_gc, q3_c = perturbed_collimated_map(absorbing_state)
        state = absorbing_state
        mu0 = np.cos(state.params.refraction_angle)
        coef = state.params.optical_depth / mu0
        assert np.allclose(np.diag(map_gc),
                           coef * state.radiation.g_collimated, rtol=1e-14)
        assert np.allclose(q3_c, -mu0 * map_gc, rtol=1e-14)


class TestWavenumberContinuity:
    def test_small_wavenumber_approaches_zero_limit(self, scattering_state):
        # the response at a = 0 is assembled by a separate exact path;
        # the swept operators must approach it linearly as a -> 0
        ops0 = assemble_diffuse_operators(scattering_state, 0.0)
        scale = np.max(np.abs(ops0.map_Gd))
        diffs = []
        for a in (1e-3, 1e-4):
            ops = assemble_diffuse_operators(scattering_state, a)
            diffs.append(np.max(np.abs(ops.map_Gd - ops0.map_Gd)) / scale)
        assert diffs[0] < 1e-2
        assert diffs[1] < 1e-4
        assert diffs[1] < 0.2 * diffs[0]

    def test_operators_change_smoothly(self, scattering_state):
        a_vals = (1.0, 1.01)
        g1, g2 = (assemble_diffuse_operators(scattering_state, a).map_Gd
                  for a in a_vals)
        scale = np.max(np.abs(g1))
        assert 0.0 < np.max(np.abs(g2 - g1)) < 0.1 * scale


class TestResolutionRobustness:
    def test_growth_rate_insensitive_to_angular_rule(self, scattering_state):
        from photobio import growth_rate
        ref = growth_rate(scattering_state, 2.0, 400.0)
        coarse = growth_rate(scattering_state, 2.0, 400.0,
                             ordinates=build_ordinates(12, 12))
        assert abs(coarse.gamma - ref.gamma) < 1e-4 * abs(ref.gamma)
