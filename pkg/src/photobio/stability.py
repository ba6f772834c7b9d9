"""Linear stability of the equilibrium suspension.

Normal modes w* = w_hat(x3) exp(gamma t + i a x1) reduce the coupled
momentum/concentration perturbation dynamics to a generalized
eigenproblem A x = gamma B x on the mesh unknowns x = [w_hat, n_hat].
The radiation response is driven by the depth integral
N(x3) = int_1^x3 n_hat, supplied by a dense spline-quadrature
integration matrix, so the concentration block keeps its natural
second-order advection-diffusion form with an identity mass-matrix
block.  (Substituting N itself as the unknown makes the mass matrix a
first-derivative operator whose near-null sawtooth space poisons the
leading eigenvalues; the integrated form converges at the design order
of the stencils.)  The vertical-velocity rows couple through buoyancy
(-a^2 Ra n_hat); the concentration rows carry the phototactic
response: local collimated-attenuation terms and the dense nonlocal
operators for the scattered intensity G*d and the horizontal diffuse
flux q1_hat.

With the wavevector in the plane of incidence the assembled pencil is
real: q1_hat is purely imaginary and enters the concentration equation
multiplied by -i a, so the spectrum is self-conjugate and invariant
under the wavevector reflection a -> -a (each oscillatory mode is a
pair of counter-propagating waves).

Discretization is fourth-order finite differences on the uniform mesh,
with one-sided closures at the walls.  Boundary-condition rows replace
the nearest interior equations and carry no gamma dependence, so they
appear as infinite eigenvalues of the pencil and are discarded by the
magnitude filter after the dense QZ solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eig
from scipy.optimize import brentq

from .basic_state import BasicState
from .fdmatrices import diff_matrix
from .perturbed import (OrdinateSet, PerturbedRadiationOperators,
                        assemble_diffuse_operators)

#: Eigenvalues at or beyond this magnitude are treated as the infinite
#: eigenvalues generated by the gamma-free boundary rows.
GAMMA_CAP = 1e8

#: A neutral mode is oscillatory when |Im gamma| exceeds this.
BRANCH_IM_TOL = 1e-4

DEFAULT_RA_BRACKET = (10.0, 1.0e4)
MAX_BRACKET_DOUBLINGS = 20

#: Default wavenumber window and sampling for curve tracing.
DEFAULT_A_RANGE = (0.1, 10.0)
DEFAULT_TRACE_POINTS = 60

#: Bifurcation wavenumbers are refined to +- half this bracket width.
BIFURCATION_DA = 0.04


class EigenFailure(RuntimeError):
    """The dense eigensolve produced no usable finite eigenvalue."""


class NoBracket(RuntimeError):
    """No sign change of Re(gamma) found over the Rayleigh bracket."""


@lru_cache(maxsize=16)
def _diff_matrices(n: int, h: float):
    return tuple(diff_matrix(n, h, k) for k in (1, 2, 3, 4))


@lru_cache(maxsize=16)
def _integration_matrix(n: int, h: float) -> np.ndarray:
    """Dense J with (J f)[i] = int_1^{x3_i} f, by cubic-spline quadrature
    of each cardinal basis function (fourth-order accurate)."""
    from scipy.interpolate import CubicSpline
    x3 = np.arange(n) * h
    j_mat = np.empty((n, n))
    basis = np.zeros(n)
    for k in range(n):
        basis[k] = 1.0
        anti = CubicSpline(x3, basis).antiderivative()
        j_mat[:, k] = anti(x3) - anti(x3[-1])
        basis[k] = 0.0
    return j_mat


# ----------------------------------------------------------------------
# Assembly
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityOperator:
    """Dense pencil (A, B) over x = [w_hat, N] with embedded BC rows."""

    a: float
    rayleigh: float
    a_mat: np.ndarray
    b_mat: np.ndarray
    bc_rows: tuple
    state: BasicState
    operators: PerturbedRadiationOperators

    @property
    def size(self) -> int:
        return self.a_mat.shape[0]


def assemble(state: BasicState, operators: PerturbedRadiationOperators,
             a: float, rayleigh: float | None = None,
             schmidt: float | None = None) -> StabilityOperator:
    """Build A x = gamma B x for x = [w_hat, n_hat] on the mesh.

    Interior w rows:
        w'''' - 2 a^2 w'' + a^4 w + a^2 Ra n_hat = gamma (w'' - a^2 w) / Sc
    Interior n_hat rows (N = J n_hat, the depth integral):
        gamma n_hat = n_hat'' - Us T_b n_hat'
          - (a^2 + 2 (tau_h/mu0) Us n_b G_b^c T_G + Us T_G dG_b^d/dx3) n_hat
          - (tau_h/mu0) Us [n_b G_b^c T_G]' N
          - Us [n_b T_G G*d]' + i a (Us n_b T_b / q_b) q1_hat - n_b' w
    Boundary rows (gamma-free, land only in A):
        w = w' = 0 at x3=0;  w = w'' = 0 at x3=1; and at both walls the
        no-flux condition n_hat' - Us T_b n_hat - Us n_b T_G G* = 0
        with G* = (map_Gc + map_Gd) N.
    """
    params = state.params
    ra = params.rayleigh if rayleigh is None else float(rayleigh)
    sc = params.schmidt if schmidt is None else float(schmidt)
    n = len(state.x3)
    if operators.map_Gd.shape != (n, n):
        raise ValueError("radiation operators were built on a different mesh")
    if abs(operators.a - a) > 1e-12 * max(1.0, abs(a)):
        raise ValueError("radiation operators were built at a different "
                         f"wavenumber ({operators.a} != {a})")
    d1, d2, d3, d4 = _diff_matrices(n, state.mesh_step)

    us = params.swim_speed
    th = params.optical_depth
    mu0 = np.cos(params.refraction_angle)
    n_b, t_b, t_g = state.n_b, state.t_b, state.dtb_dg
    g_bc = state.radiation.g_collimated
    g_bd = state.radiation.g_diffuse
    q_b = state.radiation.q_vertical
    a2 = a * a

    eye = np.eye(n)
    a_mat = np.zeros((2 * n, 2 * n), dtype=complex)
    b_mat = np.zeros((2 * n, 2 * n), dtype=complex)

    j_mat = _integration_matrix(n, state.mesh_step)

    a_mat[:n, :n] = d4 - 2.0 * a2 * d2 + (a2 * a2) * eye
    a_mat[:n, n:] = (a2 * ra) * eye
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

    bc_rows = (0, 1, n - 2, n - 1, n, 2 * n - 1)
    for row in bc_rows:
        a_mat[row] = 0.0
        b_mat[row] = 0.0
    a_mat[0, 0] = 1.0                       # w(0) = 0
    a_mat[1, :n] = d1[0]                    # w'(0) = 0
    a_mat[n - 2, :n] = d2[n - 1]            # w''(1) = 0
    a_mat[n - 1, n - 1] = 1.0               # w(1) = 0
    a_mat[n, n:] = flux_row(0)              # no-flux at x3 = 0
    a_mat[2 * n - 1, n:] = flux_row(n - 1)  # no-flux at x3 = 1

    return StabilityOperator(a=float(a), rayleigh=ra, a_mat=a_mat,
                             b_mat=b_mat, bc_rows=bc_rows, state=state,
                             operators=operators)


# ----------------------------------------------------------------------
# Eigenproblem
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ModeResult:
    """Leading eigenpair; max |n_hat| = 1 with the peak real positive."""

    gamma: complex
    w_hat: np.ndarray
    N: np.ndarray
    n_hat: np.ndarray
    a: float
    rayleigh: float
    residual: float

    def bc_residual(self, operator: StabilityOperator) -> float:
        x = np.concatenate([self.w_hat, self.n_hat])
        rows = np.asarray(operator.bc_rows)
        scale = np.max(np.abs(operator.a_mat[rows]), axis=1)
        return float(np.max(np.abs(operator.a_mat[rows] @ x) / scale)
                     / max(np.max(np.abs(x)), 1e-300))


def leading_growth_rate(operator: StabilityOperator) -> ModeResult:
    """Eigenpair maximizing Re(gamma) among finite eigenvalues of (A, B).

    Rows are equilibrated before the QZ solve (the fourth-derivative
    rows are ~1/h^4 larger than the rest, which would otherwise drown
    the residual in roundoff); scaling both matrices by the same
    diagonal leaves the spectrum unchanged.
    """
    a_mat, b_mat = operator.a_mat, operator.b_mat
    scale = np.maximum(np.max(np.abs(a_mat), axis=1),
                       np.max(np.abs(b_mat), axis=1))
    scale = 1.0 / np.maximum(scale, 1e-300)
    a_s = scale[:, None] * a_mat
    b_s = scale[:, None] * b_mat
    if np.max(np.abs(a_s.imag)) < 1e-14:
        a_s = a_s.real  # real pencil: use the cheaper real QZ
        b_s = b_s.real
    values, vectors = eig(a_s, b_s, right=True)
    keep = np.isfinite(values) & (np.abs(values) < GAMMA_CAP)
    if not np.any(keep):
        raise EigenFailure("no finite eigenvalues below the magnitude cap")
    idx = np.flatnonzero(keep)[np.argmax(values[keep].real)]
    gamma = complex(values[idx])
    x = vectors[:, idx].astype(complex)
    residual = (np.linalg.norm(a_s @ x - gamma * (b_s @ x))
                / np.linalg.norm(x))

    n = operator.size // 2
    j_mat = _integration_matrix(n, operator.state.mesh_step)
    n_hat = x[n:]
    big_n = j_mat @ n_hat
    peak = np.argmax(np.abs(n_hat))
    ref = n_hat[peak] if abs(n_hat[peak]) > 0 else x[np.argmax(np.abs(x))]
    x = x / ref
    n_hat = n_hat / ref
    big_n = big_n / ref
    return ModeResult(gamma=gamma, w_hat=x[:n], N=big_n, n_hat=n_hat,
                      a=operator.a, rayleigh=operator.rayleigh,
                      residual=float(residual))


def growth_rate(state: BasicState, a: float, rayleigh: float,
                ordinates: OrdinateSet | None = None) -> ModeResult:
    """Leading growth rate at one (a, Ra) point."""
    ops = assemble_diffuse_operators(state, a, ordinates)
    return leading_growth_rate(assemble(state, ops, a, rayleigh))


# ----------------------------------------------------------------------
# Neutral curve
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class NeutralPoint:
    a: float
    ra: float
    im_gamma: float
    branch: str                      # "stationary" | "oscillatory"

    @property
    def oscillatory(self) -> bool:
        return self.branch == "oscillatory"


@dataclass(frozen=True)
class CriticalResult:
    a_c: float
    ra_c: float
    im_gamma: float
    branch: str
    wavelength: float
    period: float | None


def neutral_ra(state: BasicState, a: float,
               ra_bracket: tuple | None = None,
               ordinates: OrdinateSet | None = None,
               operators: PerturbedRadiationOperators | None = None
               ) -> NeutralPoint:
    """Rayleigh number where Re(gamma_leading) crosses zero at fixed a.

    Brentq on Ra -> Re gamma to relative tolerance 1e-6; if the supplied
    (or default) bracket shows no sign change it is expanded by factors
    of 2, at most MAX_BRACKET_DOUBLINGS times.  The radiation operators
    do not depend on Ra and are built once.
    """
    if operators is None:
        operators = assemble_diffuse_operators(state, a, ordinates)
    modes: dict[float, ModeResult] = {}

    def mode_at(ra: float) -> ModeResult:
        if ra not in modes:
            modes[ra] = leading_growth_rate(
                assemble(state, operators, a, ra))
        return modes[ra]

    def f(ra: float) -> float:
        return mode_at(ra).gamma.real

    lo, hi = ra_bracket if ra_bracket is not None else DEFAULT_RA_BRACKET
    f_lo, f_hi = f(lo), f(hi)
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if f_lo * f_hi <= 0.0:
            break
        if f_lo > 0.0:          # already unstable at the bottom: push down
            lo *= 0.5
            f_lo = f(lo)
        else:                   # still stable at the top: push up
            hi *= 2.0
            f_hi = f(hi)
    if f_lo * f_hi > 0.0:
        raise NoBracket(
            f"Re(gamma) has no sign change on Ra in [{lo:g}, {hi:g}] at a={a:g}")
    root = brentq(f, lo, hi, rtol=1e-6)
    mode = mode_at(root)
    im = abs(mode.gamma.imag)
    branch = "oscillatory" if im > BRANCH_IM_TOL else "stationary"
    return NeutralPoint(a=float(a), ra=float(root), im_gamma=float(im),
                        branch=branch)


def _warm_bracket(ra: float) -> tuple:
    return (ra / 1.5, ra * 1.5)


@dataclass(frozen=True)
class NeutralCurve:
    points: tuple                    # NeutralPoint, ascending in a
    bifurcations: tuple              # wavenumbers of branch-type changes
    gaps: tuple                      # wavenumbers where no root bracketed


def trace_neutral_curve(state: BasicState,
                        a_range: tuple = DEFAULT_A_RANGE,
                        n_points: int = DEFAULT_TRACE_POINTS,
                        ordinates: OrdinateSet | None = None) -> NeutralCurve:
    """Lowest neutral branch Ra^n(a), warm-starting each bracket from the
    neighbouring root; branch-type changes between consecutive points are
    refined by bisection in a to within +-BIFURCATION_DA/2."""
    a_values = np.linspace(a_range[0], a_range[1], int(n_points))
    points: list[NeutralPoint] = []
    gaps: list[float] = []
    last: NeutralPoint | None = None

    def solve(a: float, seed: NeutralPoint | None) -> NeutralPoint:
        if seed is not None:
            try:
                return neutral_ra(state, a, _warm_bracket(seed.ra),
                                  ordinates=ordinates)
            except NoBracket:
                pass
        return neutral_ra(state, a, ordinates=ordinates)

    for a in a_values:
        try:
            last = solve(float(a), last)
        except NoBracket:
            gaps.append(float(a))
            continue
        points.append(last)

    bifurcations: list[float] = []
    extra: list[NeutralPoint] = []
    for left, right in zip(points, points[1:]):
        if left.branch == right.branch:
            continue
        lo, hi = left, right
        while hi.a - lo.a > BIFURCATION_DA:
            mid = solve(0.5 * (lo.a + hi.a), lo)
            extra.append(mid)
            if mid.branch == lo.branch:
                lo = mid
            else:
                hi = mid
        bifurcations.append(0.5 * (lo.a + hi.a))

    merged = sorted(points + extra, key=lambda p: p.a)
    return NeutralCurve(points=tuple(merged),
                        bifurcations=tuple(bifurcations),
                        gaps=tuple(gaps))


def find_critical(state: BasicState,
                  a_range: tuple = DEFAULT_A_RANGE,
                  n_points: int = DEFAULT_TRACE_POINTS,
                  ordinates: OrdinateSet | None = None,
                  curve: NeutralCurve | None = None) -> CriticalResult:
    """Minimum of the neutral curve over a, refined by golden-section
    search to a wavenumber resolution of 1e-3."""
    if curve is None:
        curve = trace_neutral_curve(state, a_range, n_points, ordinates)
    if not curve.points:
        raise NoBracket("no neutral points found over the wavenumber range")
    pts = curve.points
    k = min(range(len(pts)), key=lambda i: pts[i].ra)
    lo = pts[k - 1].a if k > 0 else pts[k].a
    hi = pts[k + 1].a if k + 1 < len(pts) else pts[k].a

    cache: dict[float, NeutralPoint] = {p.a: p for p in pts}

    def ra_of(a: float) -> float:
        if a not in cache:
            cache[a] = neutral_ra(state, a, _warm_bracket(pts[k].ra),
                                  ordinates=ordinates)
        return cache[a].ra

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = ra_of(x1), ra_of(x2)
    while hi - lo > 1e-3:
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = ra_of(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = ra_of(x2)
    best = min(cache.values(), key=lambda p: p.ra)
    period = 2.0 * np.pi / best.im_gamma if best.oscillatory else None
    return CriticalResult(a_c=best.a, ra_c=best.ra, im_gamma=best.im_gamma,
                          branch=best.branch,
                          wavelength=2.0 * np.pi / best.a,
                          period=period)


# ----------------------------------------------------------------------
# Eigenmode snapshots
# ----------------------------------------------------------------------

def eigenmode_snapshots(mode: ModeResult, a: float,
                        fractions=(0.0, 0.25, 0.5, 0.75, 1.0),
                        n_x1: int = 64):
    """Physical fields w*(x1, x3, t), n*(x1, x3, t) over one oscillation.

    Returns (x1, times, w_fields, n_fields); each field is real with shape
    (len(x3), n_x1), sampled at t = fraction * 2 pi / |Im gamma| over one
    horizontal wavelength.  Only the oscillatory part of the eigenvalue is
    used in the time factor, so the snapshots trace the neutral limit cycle
    and the fraction-0 and fraction-1 fields coincide exactly.
    """
    im = mode.gamma.imag
    if abs(im) <= BRANCH_IM_TOL:
        raise ValueError("snapshots need an oscillatory mode")
    period = 2.0 * np.pi / abs(im)
    x1 = np.linspace(0.0, 2.0 * np.pi / a, int(n_x1))
    phase = np.exp(1j * a * x1)[None, :]
    times = [float(f) * period for f in fractions]
    w_fields = [np.real(mode.w_hat[:, None] * phase * np.exp(1j * im * t))
                for t in times]
    n_fields = [np.real(mode.n_hat[:, None] * phase * np.exp(1j * im * t))
                for t in times]
    return x1, times, w_fields, n_fields
