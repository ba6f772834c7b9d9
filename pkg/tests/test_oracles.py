"""Self-consistency of the independent cross-check solvers."""

import json
import math

import numpy as np
import pytest

from photobio import NumericsConfig, SuspensionParams, calibrate_upsilon, \
    growth_rate, solve_basic_state
from photobio.oracles import (OracleReport, oracle_alt_growth_rate,
                              oracle_fixed_point_fine,
                              oracle_rte_source_iteration)

RELAXED = NumericsConfig(picard_relaxation=0.3, picard_max_iter=3000)


class TestOracleReport:
    def test_relative_difference_and_verdict(self):
        report = OracleReport(quantity="gamma", production=1.0005,
                              oracle=1.0, tolerance=1e-3)
        assert report.relative_difference == pytest.approx(5e-4, rel=1e-10)
        assert report.passed

    def test_json_round_trip(self):
        report = OracleReport(quantity="gamma", production=2.0,
                              oracle=1.0, tolerance=1e-3)
        data = json.loads(report.to_json())
        assert data["quantity"] == "gamma"
        assert data["passed"] is False
        assert data["relative_difference"] == pytest.approx(1.0)

    def test_small_scale_uses_absolute_difference(self):
        report = OracleReport(quantity="q2", production=1e-13,
                              oracle=0.0, tolerance=1e-12)
        assert report.passed


class TestSourceIteration:
    def test_pure_absorption_is_exact(self):
        alpha0 = math.asin(math.sin(math.radians(40.0)) / 1.333)
        tau, g, q = oracle_rte_source_iteration(1.0, 0.0, 0.0, alpha0,
                                                n_tau=101, n_mu=16)
        exact = np.exp(-tau / math.cos(alpha0))
        assert np.max(np.abs(g - exact)) < 1e-10
        assert np.max(np.abs(q - math.cos(alpha0) * exact)) < 1e-10

    def test_scattering_increases_intensity(self):
        tau, g0, _ = oracle_rte_source_iteration(0.8, 0.0, 0.0, 0.0)
        _, g8, _ = oracle_rte_source_iteration(0.8, 0.8, 0.0, 0.0)
        assert np.all(g8 >= g0 - 1e-12)
        assert np.max(g8 - g0) > 0.1


class TestFixedPoint:
    def test_no_swimming_uniform(self):
        params = SuspensionParams(swim_speed=0.0, optical_depth=0.8,
                                  albedo=0.5)
        _, n_b, _ = oracle_fixed_point_fine(params, n_mesh=201)
        assert np.max(np.abs(n_b - 1.0)) < 1e-10

    def test_unit_mean(self):
        params = SuspensionParams(swim_speed=10.0, optical_depth=0.8,
                                  albedo=0.8, aniso=0.2)
        x3, n_b, _ = oracle_fixed_point_fine(params, n_mesh=201)
        assert np.trapezoid(n_b, x3) == pytest.approx(1.0, abs=1e-8)


class TestAlternateGrowthRate:
    def test_agreement_with_production(self):
        params = SuspensionParams(schmidt=20.0, swim_speed=10.0,
                                  optical_depth=0.25, albedo=0.0,
                                  aniso=0.0, upsilon=calibrate_upsilon(0.85))
        a, rayleigh = 2.0, 200.0
        state = solve_basic_state(params, RELAXED)
        prod = growth_rate(state, a, rayleigh).gamma
        alt = oracle_alt_growth_rate(params, a, rayleigh)
        assert abs(prod - alt) / abs(alt) < 5e-4   # 4 significant figures

    def test_both_schemes_stable_without_buoyancy(self):
        params = SuspensionParams(schmidt=20.0, swim_speed=10.0,
                                  optical_depth=0.25, albedo=0.0,
                                  aniso=0.0, upsilon=calibrate_upsilon(0.85))
        state = solve_basic_state(params, RELAXED)
        prod = growth_rate(state, 2.0, 0.0).gamma
        alt = oracle_alt_growth_rate(params, 2.0, 0.0,
                                     meshes=(101, 201))
        assert prod.real < 0.0
        assert alt.real < 0.0
