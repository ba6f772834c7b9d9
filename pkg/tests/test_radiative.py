"""Equilibrium radiation field: Fredholm pair and mesh mapping."""

import math

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from photobio.oracles import oracle_rte_source_iteration
from photobio.radiative import (OpticalGrid, build_optical_grid,
                                collimated_components, graded_tau_grid,
                                radiation_on_mesh, solve_fredholm_pair)


class TestPureAbsorption:
    @pytest.mark.parametrize("alpha_i_deg", [0.0, 40.0, 80.0])
    @pytest.mark.parametrize("tau_total", [0.25, 1.0])
    def test_no_scattering_gives_exponential_attenuation(self, alpha_i_deg,
                                                         tau_total):
        # with zero albedo the diffuse field vanishes and the total
        # intensity is the attenuated beam
        alpha0 = math.asin(math.sin(math.radians(alpha_i_deg)) / 1.333)
        sol = solve_fredholm_pair(tau_total, albedo=0.0, aniso=0.0,
                                  alpha0=alpha0)
        exact = np.exp(-sol.tau / math.cos(alpha0))
        assert np.max(np.abs(sol.g_total - exact)) < 1e-10
        assert np.max(np.abs(sol.q_total - math.cos(alpha0) * exact)) < 1e-10

    def test_intensity_scaling_is_linear(self):
        s1 = solve_fredholm_pair(0.5, 0.6, 0.3, 0.2, intensity=1.0)
        s2 = solve_fredholm_pair(0.5, 0.6, 0.3, 0.2, intensity=2.5)
        assert np.allclose(2.5 * s1.g_total, s2.g_total, rtol=1e-12)


class TestIsotropicDecoupling:
    def test_anisotropy_ignored_when_zero(self):
        # with A=0 the flux unknown drops out of the intensity equation:
        # solving the coupled pair must match a pure-intensity solve
        base = solve_fredholm_pair(0.8, 0.8, 0.0, 0.3)
        # independent path: source iteration (isotropic-only physics)
        tau, g_ref, _ = oracle_rte_source_iteration(
            0.8, 0.8, 0.0, 0.3, n_tau=401, n_mu=96)
        ours = CubicSpline(base.tau, base.g_total)(tau)
        assert np.max(np.abs(ours - g_ref)) < 1e-4


class TestOracleAgreement:
    def test_forward_scattering_profile(self):
        tau_total, albedo, aniso, alpha0 = 0.8, 0.8, 0.2, 0.0
        sol = solve_fredholm_pair(tau_total, albedo, aniso, alpha0)
        tau, g_ref, q_ref = oracle_rte_source_iteration(
            tau_total, albedo, aniso, alpha0, n_tau=401, n_mu=96)
        g_ours = CubicSpline(sol.tau, sol.g_total)(tau)
        q_ours = CubicSpline(sol.tau, sol.q_total)(tau)
        assert np.max(np.abs(g_ours - g_ref)) < 1e-4
        assert np.max(np.abs(q_ours - q_ref)) < 1e-4


class TestFluxDivergenceIdentity:
    @pytest.mark.parametrize("albedo", [0.3, 0.8])
    def test_dq_dtau_equals_absorption(self, albedo):
        # radiative energy balance: the downward flux loses the absorbed
        # fraction as tau increases, d q / d tau = -(1 - omega) G
        sol = solve_fredholm_pair(1.0, albedo, 0.4, 0.5, n_quad=201)
        dq = np.gradient(sol.q_total, sol.tau)
        resid = dq + (1.0 - albedo) * sol.g_total
        # interior nodes only; one-sided differences at the faces are
        # first-order and the boundary layer is steep
        assert np.max(np.abs(resid[5:-5])) < 2e-4

    def test_conservative_limit_constant_flux(self):
        # omega = 1: no absorption, vertical flux is exactly constant
        sol = solve_fredholm_pair(0.7, 1.0, 0.3, 0.2, n_quad=151)
        assert np.ptp(sol.q_total) < 1e-6


class TestMeshMapping:
    def test_optical_grid_orientation(self):
        x3 = np.linspace(0.0, 1.0, 101)
        n_b = np.ones_like(x3)
        grid = build_optical_grid(n_b, 0.8, x3)
        assert grid.tau_nodes[-1] == 0.0            # illuminated top
        assert grid.tau_total == pytest.approx(0.8, rel=1e-12)
        assert np.all(np.diff(grid.tau_nodes) < 0)

    def test_nonuniform_profile_total_depth(self):
        x3 = np.linspace(0.0, 1.0, 101)
        n_b = 1.0 + 0.5 * np.sin(np.pi * x3)
        grid = build_optical_grid(n_b, 0.6, x3)
        exact = 0.6 * (1.0 + 1.0 / np.pi)           # 0.6 * int (1+0.5 sin)
        assert grid.tau_total == pytest.approx(exact, rel=1e-8)

    def test_rejects_negative_concentration(self):
        x3 = np.linspace(0.0, 1.0, 51)
        with pytest.raises(ValueError):
            build_optical_grid(np.full_like(x3, -1.0), 0.5, x3)

    def test_radiation_on_mesh_consistency(self):
        x3 = np.linspace(0.0, 1.0, 101)
        grid = build_optical_grid(np.ones_like(x3), 1.0, x3)
        sol = solve_fredholm_pair(1.0, 0.5, 0.2, 0.0)
        field = radiation_on_mesh(grid, sol, intensity=1.0, alpha0=0.0)
        assert np.allclose(field.g_total,
                           field.g_collimated + field.g_diffuse, atol=1e-12)
        assert np.allclose(field.q_vertical,
                           field.q_collimated + field.q_diffuse, atol=1e-12)
        # top boundary: beam enters undiminished
        assert field.g_collimated[-1] == pytest.approx(1.0, rel=1e-12)

    def test_graded_grid_symmetric_and_monotone(self):
        g = graded_tau_grid(1.0, 41)
        assert np.all(np.diff(g) > 0)
        assert g[0] == 0.0 and g[-1] == pytest.approx(1.0, rel=1e-14)
        assert np.allclose(g + g[::-1], 1.0, atol=1e-14)


class TestConvergence:
    def test_quadrature_refinement(self):
        coarse = solve_fredholm_pair(0.8, 0.8, 0.2, 0.3, n_quad=51)
        fine = solve_fredholm_pair(0.8, 0.8, 0.2, 0.3, n_quad=201)
        g_c = CubicSpline(coarse.tau, coarse.g_total)(fine.tau)
        assert np.max(np.abs(g_c - fine.g_total)) < 5e-5
