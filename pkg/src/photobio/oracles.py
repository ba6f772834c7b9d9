"""Slow, independent reference solvers used to cross-check production code.

These deliberately use different discretizations from the production
path (discrete-ordinate sweeps with source iteration instead of the
Nystrom integral-equation solve; second-order finite differences with
Richardson extrapolation and a Newton eigenvalue iteration instead of
the fourth-order direct eigensolve), so agreement is evidence rather
than tautology.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .params import NumericsConfig, SuspensionParams
from .special import gauss_legendre


class OracleDivergence(RuntimeError):
    pass


@dataclass
class OracleReport:
    quantity: str
    production: float
    oracle: float
    tolerance: float

    @property
    def relative_difference(self) -> float:
        return abs(self.production - self.oracle) / max(1.0, abs(self.oracle))

    @property
    def passed(self) -> bool:
        return self.relative_difference <= self.tolerance

    def to_json(self) -> str:
        payload = asdict(self)
        payload["relative_difference"] = self.relative_difference
        payload["passed"] = self.passed
        return json.dumps(payload)


def oracle_rte_source_iteration(tau_total: float, albedo: float, aniso: float,
                                alpha0: float, intensity: float = 1.0,
                                n_tau: int = 201, n_mu: int = 64,
                                tol: float = 1e-10, max_iter: int = 2000):
    """Basic-state radiation by discrete-ordinate sweeps in tau.

    Solves the up/down intensity ODEs with an exact exponential
    integrating factor per cell (linear source within the cell) and
    iterates the scattering source to a fixed point.  Returns
    (tau, G, q) with q the downward-positive vertical flux.
    """
    tau = np.linspace(0.0, tau_total, n_tau)
    h = tau[1] - tau[0]
    mu0 = np.cos(alpha0)
    g_c = intensity * np.exp(-tau / mu0)
    q_c = mu0 * g_c

    rule = gauss_legendre(n_mu).mapped(0.0, 1.0)
    mu = rule.nodes            # magnitudes of the vertical direction cosine
    w = rule.weights

    g = g_c.copy()
    q = q_c.copy()            # positive downward
    # exact linear-source update coefficients per ordinate
    c = 1.0 / mu
    z = c * h
    emz = np.exp(-z)
    int_const = (1.0 - emz) / c
    beta = 1.0 / c - (1.0 - emz) / (c * c * h)
    alph = int_const - beta

    for iteration in range(max_iter):
        # source S(tau, +-mu) = (omega/4) (G -+ A mu q), the 1/pi angular
        # normalization already folded into the half-range moments below
        s_up = 0.25 * albedo * (g[None, :] - aniso * mu[:, None] * q[None, :])
        s_dn = 0.25 * albedo * (g[None, :] + aniso * mu[:, None] * q[None, :])

        # upward intensities: integrate from tau = tau_h (bottom) towards 0
        i_up = np.zeros_like(s_up)
        for j in range(n_tau - 2, -1, -1):
            i_up[:, j] = (i_up[:, j + 1] * emz
                          + (alph * s_up[:, j + 1] + beta * s_up[:, j]) / mu)
        # downward: integrate from tau = 0 (top) towards tau_h
        i_dn = np.zeros_like(s_dn)
        for j in range(1, n_tau):
            i_dn[:, j] = (i_dn[:, j - 1] * emz
                          + (alph * s_dn[:, j - 1] + beta * s_dn[:, j]) / mu)

        g_new = g_c + 2.0 * ((w @ i_up) + (w @ i_dn))
        q_new = q_c + 2.0 * ((w * mu) @ i_dn - (w * mu) @ i_up)
        delta = max(np.max(np.abs(g_new - g)), np.max(np.abs(q_new - q)))
        g, q = g_new, q_new
        if delta < tol:
            return tau, g, q
    raise OracleDivergence(
        f"source iteration stalled at delta={delta:.3e} after {max_iter} sweeps")


def oracle_fixed_point_fine(params: SuspensionParams, n_mesh: int = 401,
                            n_tau: int = 201, n_mu: int = 64,
                            tol: float = 1e-10, max_iter: int = 4000,
                            relaxation: float = 0.5):
    """Equilibrium concentration by an independent fixed-point loop.

    Radiation comes from the discrete-ordinate source iteration, the
    depth integrals from plain trapezoid sums on a fine uniform mesh,
    and the concentration from the closed-form exponential of the
    cumulative taxis integral.  Returns (x3, n_b, g_b).
    """
    from scipy.integrate import cumulative_trapezoid

    x3 = np.linspace(0.0, 1.0, n_mesh)
    alpha0 = params.refraction_angle
    n_b = np.ones(n_mesh)

    def step(profile):
        # optical depth measured downward from the top surface x3 = 1
        below = cumulative_trapezoid(profile[::-1], x3, initial=0.0)[::-1]
        tau_mesh = params.optical_depth * below
        tau_total = tau_mesh[0]
        tau_u, g_u, _ = oracle_rte_source_iteration(
            tau_total, params.albedo, params.aniso, alpha0,
            intensity=params.intensity, n_tau=n_tau, n_mu=n_mu)
        g_mesh = np.interp(tau_mesh, tau_u, g_u)
        t_b = params.taxis(g_mesh)
        expo = params.swim_speed * cumulative_trapezoid(t_b, x3, initial=0.0)
        expo -= expo.max()
        n_new = np.exp(expo)
        n_new /= np.trapezoid(n_new, x3)
        return n_new, g_mesh

    for _ in range(max_iter):
        n_new, g_mesh = step(n_b)
        delta = float(np.max(np.abs(n_new - n_b)))
        n_b = n_b + relaxation * (n_new - n_b)
        if delta < tol:
            return x3, n_b, g_mesh
    raise OracleDivergence(
        f"fixed-point iteration stalled at delta={delta:.3e}")


# ----------------------------------------------------------------------
# Alternate-scheme growth rate
# ----------------------------------------------------------------------

def _second_order_stencils(n: int, h: float):
    """Plain second-order difference matrices with one-sided closures."""
    d1 = np.zeros((n, n))
    d2 = np.zeros((n, n))
    for i in range(1, n - 1):
        d1[i, i - 1:i + 2] = (-0.5, 0.0, 0.5)
        d2[i, i - 1:i + 2] = (1.0, -2.0, 1.0)
    d1[0, :3] = (-1.5, 2.0, -0.5)
    d1[-1, -3:] = (0.5, -2.0, 1.5)
    d2[0, :4] = (2.0, -5.0, 4.0, -1.0)
    d2[-1, -4:] = (-1.0, 4.0, -5.0, 2.0)
    return d1 / h, d2 / (h * h)


def _trapezoid_integration_matrix(n: int, h: float) -> np.ndarray:
    """(J f)[i] = integral from 1 down to x3_i of f, by trapezoid sums."""
    j_mat = np.zeros((n, n))
    for i in range(n - 1):
        j_mat[i, i:] = -h
        j_mat[i, i] = -0.5 * h
        j_mat[i, -1] = -0.5 * h
    return j_mat


def _assemble_second_order(state, operators, a: float, rayleigh: float):
    """The stability pencil rebuilt with second-order stencils and
    trapezoid depth integration; same unknowns x = [w_hat, n_hat] and
    boundary rows as the production assembly."""
    params = state.params
    n = len(state.x3)
    h = state.mesh_step
    d1, d2 = _second_order_stencils(n, h)
    d4 = d2 @ d2
    j_mat = _trapezoid_integration_matrix(n, h)

    us = params.swim_speed
    th = params.optical_depth
    mu0 = np.cos(params.refraction_angle)
    n_b, t_b, t_g = state.n_b, state.t_b, state.dtb_dg
    g_bc = state.radiation.g_collimated
    g_bd = state.radiation.g_diffuse
    q_b = state.radiation.q_vertical
    a2 = a * a
    sc = params.schmidt

    eye = np.eye(n)
    a_mat = np.zeros((2 * n, 2 * n), dtype=complex)
    b_mat = np.zeros((2 * n, 2 * n), dtype=complex)
    a_mat[:n, :n] = d4 - 2.0 * a2 * d2 + (a2 * a2) * eye
    a_mat[:n, n:] = (a2 * rayleigh) * eye
    b_mat[:n, :n] = (d2 - a2 * eye) / sc

    gd_j = operators.map_Gd @ j_mat
    q1_j = operators.map_q1 @ j_mat
    ann = d2 - us * t_b[:, None] * d1
    ann = ann - np.diag(a2 + 2.0 * (th / mu0) * us * n_b * g_bc * t_g
                        + us * t_g * (d1 @ g_bd))
    ann = ann - ((th / mu0) * us * (d1 @ (n_b * g_bc * t_g)))[:, None] * j_mat
    ann = ann - us * (d1 @ ((n_b * t_g)[:, None] * gd_j))
    ann = ann + (1j * a * us * n_b * t_b / q_b)[:, None] * q1_j
    a_mat[n:, :n] = -np.diag(state.dnb_dx3)
    a_mat[n:, n:] = ann
    b_mat[n:, n:] = eye

    map_gj = (operators.map_Gc @ j_mat) + gd_j

    def flux_row(i):
        row = d1[i] - (us * n_b[i] * t_g[i]) * map_gj[i]
        row = row.astype(complex)
        row[i] -= us * t_b[i]
        return row

    for row in (0, 1, n - 2, n - 1, n, 2 * n - 1):
        a_mat[row] = 0.0
        b_mat[row] = 0.0
    a_mat[0, 0] = 1.0
    a_mat[1, :n] = d1[0]
    a_mat[n - 2, :n] = d2[n - 1]
    a_mat[n - 1, n - 1] = 1.0
    a_mat[n, n:] = flux_row(0)
    a_mat[2 * n - 1, n:] = flux_row(n - 1)
    return a_mat, b_mat


def _bordered_newton(a_mat, b_mat, gamma, x, tol=1e-9, max_iter=40):
    """Refine one eigenpair of A x = gamma B x with the normalization
    c.x = 1 appended (c = the conjugate of the seed vector).

    Rows of (A, B) are equilibrated first (spectrum-preserving), and the
    iteration stops either below `tol` or at the roundoff floor, where
    the update size stops decreasing.
    """
    m = len(x)
    scale = np.maximum(np.max(np.abs(a_mat), axis=1),
                       np.max(np.abs(b_mat), axis=1))
    scale = 1.0 / np.maximum(scale, 1e-300)
    a_mat = scale[:, None] * a_mat
    b_mat = scale[:, None] * b_mat
    c = x.conj() / (x.conj() @ x)
    x = x / (c @ x)
    previous = np.inf
    for iteration in range(max_iter):
        bx = b_mat @ x
        r = a_mat @ x - gamma * bx
        jac = np.zeros((m + 1, m + 1), dtype=complex)
        jac[:m, :m] = a_mat - gamma * b_mat
        jac[:m, m] = -bx
        jac[m, :m] = c
        rhs = np.concatenate([-r, [1.0 - c @ x]])
        delta = np.linalg.solve(jac, rhs)
        x = x + delta[:m]
        gamma = gamma + delta[m]
        size = (np.linalg.norm(delta[:m]) / max(np.linalg.norm(x), 1e-300)
                + abs(delta[m]) / max(1.0, abs(gamma)))
        if size < tol:
            return gamma, x
        if iteration >= 2 and size >= 0.5 * previous and size < 1e-6:
            return gamma, x          # roundoff floor
        previous = size
    raise OracleDivergence("bordered Newton eigenvalue iteration stalled")


def oracle_alt_growth_rate(params: SuspensionParams, a: float, rayleigh: float,
                           numerics: NumericsConfig | None = None,
                           meshes=(101, 201, 401)) -> complex:
    """Leading growth rate by an alternate discretization.

    Second-order stencils, trapezoid depth integration, a dense
    eigensolve only on the coarsest mesh to seed, bordered-Newton
    refinement on the finer meshes, and Richardson extrapolation of the
    second-order sequence.  Meshes must successively double the
    resolution (n -> 2n - 1).
    """
    from dataclasses import replace as _replace

    from scipy.linalg import eig as _eig

    from .basic_state import solve_basic_state
    from .perturbed import assemble_diffuse_operators

    base = numerics if numerics is not None else NumericsConfig()
    for lo, hi in zip(meshes, meshes[1:]):
        if hi != 2 * lo - 1:
            raise ValueError("meshes must double the resolution (n -> 2n-1)")

    gammas = []
    x_prev = None
    for k, m in enumerate(meshes):
        state = solve_basic_state(params, _replace(base, mesh_points=m))
        ops = assemble_diffuse_operators(state, a)
        a_mat, b_mat = _assemble_second_order(state, ops, a, rayleigh)
        if k == 0:
            scale = np.maximum(np.max(np.abs(a_mat), axis=1),
                               np.max(np.abs(b_mat), axis=1))
            scale = 1.0 / np.maximum(scale, 1e-300)
            vals, vecs = _eig(scale[:, None] * a_mat, scale[:, None] * b_mat)
            keep = np.isfinite(vals) & (np.abs(vals) < 1e8)
            idx = np.flatnonzero(keep)[np.argmax(vals[keep].real)]
            gamma, x = _bordered_newton(a_mat, b_mat, complex(vals[idx]),
                                        vecs[:, idx].astype(complex))
        else:
            # inject the previous eigenvector on the doubled mesh
            half = len(x_prev) // 2
            x0 = np.zeros(2 * m, dtype=complex)
            x0[:m:2] = x_prev[:half]
            x0[1:m:2] = 0.5 * (x_prev[:half - 1] + x_prev[1:half])
            x0[m::2] = x_prev[half:]
            x0[m + 1::2] = 0.5 * (x_prev[half:-1] + x_prev[half + 1:])
            gamma, x = _bordered_newton(a_mat, b_mat, gammas[-1], x0)
        gammas.append(gamma)
        x_prev = x

    if len(gammas) == 1:
        return gammas[0]
    # second-order Richardson on the last halving
    return gammas[-1] + (gammas[-1] - gammas[-2]) / 3.0
