"""Self-consistent equilibrium of phototaxis against diffusion.

The cell conservation ODE  dn_b/dx3 = Us T_b n_b  with the unit-mean
normalization has the closed-form solution

    n_b(x3) = exp(Us int_0^x3 T_b) / int_0^1 exp(Us int_0^s T_b) ds,

so the outer problem is a plain fixed point: concentration -> optical
depth map -> radiation field -> taxis profile -> concentration.  In the
optical-depth coordinate the Fredholm pair does not see n_b at all
(only its unit integral), so the radiation field is solved once and the
Picard iteration merely re-maps it through tau(x3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .params import NumericsConfig, SuspensionParams
from .radiative import (RadiationField, TauSolution, _cumulative_integral,
                        build_optical_grid, radiation_on_mesh,
                        solve_fredholm_pair)


class NoConvergenceError(RuntimeError):
    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class BasicState:
    params: SuspensionParams
    numerics: NumericsConfig
    x3: np.ndarray
    n_b: np.ndarray
    radiation: RadiationField
    tau_solution: TauSolution
    t_b: np.ndarray          # taxis profile T(G_b)
    dtb_dg: np.ndarray       # dT/dG along G_b
    iterations_used: int
    residual: float
    converged: bool = True

    @property
    def g_b(self) -> np.ndarray:
        return self.radiation.g_total

    @property
    def q_b(self) -> np.ndarray:
        return self.radiation.q_vertical

    @property
    def dnb_dx3(self) -> np.ndarray:
        # exact from the equilibrium ODE
        return self.params.swim_speed * self.t_b * self.n_b

    @property
    def mesh_step(self) -> float:
        return float(self.x3[1] - self.x3[0])

    def mean_concentration(self) -> float:
        return float(_cumulative_integral(self.n_b, self.mesh_step)[-1])

    def conservation_residual(self) -> float:
        """Sup-norm defect of n_b against the exact quadrature solution of
        the equilibrium ODE driven by the stored taxis profile."""
        expo = self.params.swim_speed * _cumulative_integral(self.t_b,
                                                             self.mesh_step)
        return float(np.max(np.abs(self.n_b - self.n_b[0] * np.exp(expo))))


def concentration_update(t_b: np.ndarray, swim_speed: float,
                         x3: np.ndarray) -> np.ndarray:
    """Exact solution of dn/dx3 = Us T n with unit mean."""
    h = x3[1] - x3[0]
    expo = swim_speed * _cumulative_integral(np.asarray(t_b, float), h)
    expo -= expo.max()  # overflow guard; normalization removes the shift
    n = np.exp(expo)
    norm = _cumulative_integral(n, h)[-1]
    return n / norm


def solve_basic_state(params: SuspensionParams,
                      numerics: NumericsConfig = NumericsConfig()) -> BasicState:
    """Picard iteration with under-relaxation, starting from n_b = 1."""
    n_mesh = numerics.mesh_points
    x3 = np.linspace(0.0, 1.0, n_mesh)
    alpha0 = params.refraction_angle
    us = params.swim_speed

    n_b = np.ones(n_mesh)
    tau_sol = None
    tau_total_cached = None
    residual = np.inf
    iterations = 0

    def one_step(profile):
        nonlocal tau_sol, tau_total_cached
        grid = build_optical_grid(profile, params.optical_depth, x3)
        if tau_sol is None or abs(grid.tau_total - tau_total_cached) > 1e-12:
            tau_sol = solve_fredholm_pair(
                grid.tau_total, params.albedo, params.aniso, alpha0,
                intensity=params.intensity,
                n_quad=numerics.tau_quadrature_points)
            tau_total_cached = grid.tau_total
        radiation = radiation_on_mesh(grid, tau_sol, params.intensity, alpha0)
        t_b = params.taxis(radiation.g_total)
        return radiation, t_b, concentration_update(t_b, us, x3)

    relax = numerics.picard_relaxation
    for iterations in range(1, numerics.picard_max_iter + 1):
        _, _, n_new = one_step(n_b)
        residual = float(np.max(np.abs(n_new - n_b)))
        n_b = n_b + relax * (n_new - n_b)
        if residual < numerics.picard_tol:
            break

    # polish with full steps while they still contract, so that n_b is
    # self-consistent with its own taxis profile to near machine level
    for _ in range(40):
        _, _, n_new = one_step(n_b)
        new_residual = float(np.max(np.abs(n_new - n_b)))
        if new_residual >= residual and new_residual > numerics.picard_tol:
            break
        n_b, residual = n_new, new_residual
        if residual < 1e-13:
            break

    radiation, t_b, _ = one_step(n_b)
    state = BasicState(
        params=params, numerics=numerics, x3=x3, n_b=n_b,
        radiation=radiation, tau_solution=tau_sol,
        t_b=t_b, dtb_dg=params.taxis_slope(radiation.g_total),
        iterations_used=iterations, residual=residual,
        converged=residual < numerics.picard_tol)
    if not state.converged:
        raise NoConvergenceError(
            f"basic state did not converge in {iterations} iterations "
            f"(residual {residual:.3e})", last=state)
    return state


def locate_critical_crossings(state: BasicState, g_c: float) -> list[float]:
    """All depths where the total intensity crosses g_c, sorted ascending."""
    spline = CubicSpline(state.x3, state.g_b - g_c)
    vals = spline(state.x3)
    roots = []
    for lo, hi, vlo, vhi in zip(state.x3[:-1], state.x3[1:], vals[:-1], vals[1:]):
        if vlo == 0.0:
            roots.append(float(lo))
        elif vlo * vhi < 0:
            roots.append(float(brentq(spline, lo, hi, xtol=1e-12)))
    if vals[-1] == 0.0:
        roots.append(float(state.x3[-1]))
    return sorted(roots)
