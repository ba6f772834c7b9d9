"""Linearized radiation response to a concentration perturbation.

The perturbation unknown is N(x3) = integral_1^{x3} n_hat, sampled on
the solver mesh.  This module builds dense complex matrices taking
those samples to the perturbed intensity G* = G*c + G*d and the flux
components q1_hat, q2_hat, q3_hat on the same mesh.

The collimated part is closed form (attenuation perturbation of the
oblique beam).  The diffuse part integrates the perturbed transport
equation along characteristics: each ray (eta3, zeta) is marched
through the slab with exact exponential linear-source updates, the
horizontal phase factor exp(-i a eta1 dx3 / eta3) absorbed into the
(complex) attenuation rate.  Because the phase lives in the exponent
of an exactly integrated kernel, the march stays uniformly accurate
in the vertical cosine no matter how fast the phase rotates - a fixed
source grid quadratured against sampled oscillatory kernels would
need ever finer steps as eta3 -> 0.  Ray intensities at -cos(zeta)
are complex conjugates of those at +cos(zeta), so a quarter circle of
azimuth nodes carries the full integral: the intensity and vertical
flux moments are real parts, the horizontal flux is an imaginary
part, and q2_hat vanishes identically.  The vertical cosine uses
Gauss panels geometrically graded toward grazing (the kernels vary on
the relative scale dmu/mu).

The scattering source couples back to the angular moments G*d and
q3_hat^d; that self-consistency is closed by expanding the two moment
profiles and N in a fixed Chebyshev basis and solving the small
resolvent system (I - L) m = m0(N) in coefficient space - algebraically
the same fixed point a source iteration would reach.

Quadrature in the vertical cosine alone converges slowly here: the
moment response to a point source carries the same E1-type logarithmic
singularity as the equilibrium problem.  The assembly therefore applies
singularity subtraction: the zero-wavenumber moment operator is
computed exactly with the E1/E2/E3 product-integration kernels (at
a = 0 the problem is the equilibrium one, and the response to N is the
linearized optical-depth remap of the equilibrium diffuse field), and
the ordinate sweeps only supply the difference between wavenumber a
and 0, whose kernel is bounded:

    moments(a) = sweeps(a) - sweeps(0) + exact(0).

The transport grid is a fixed fine refinement independent of the solver
mesh, and the closure basis and cosine rule are fixed as well, so the
assembled operators are essentially mesh-independent; they inherit the
mesh only through sampling rows and the Chebyshev fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .basic_state import BasicState
from .radiative import fredholm_weights, solve_fredholm_pair

#: Target number of intervals on the internal transport grid.
TRANSPORT_INTERVALS = 400

#: Number of Chebyshev trial modes used for the scattering closure and
#: for smoothing the N profile fed to the transport kernels.
CLOSURE_MODES = 32


@dataclass(frozen=True)
class OrdinateSet:
    """Angular quadrature: |eta3| Gauss-Legendre panels per hemisphere
    on (0,1) times azimuth midpoints on the quarter circle (0, pi/2).
    Conjugation and reflection symmetry of the ray intensities fold the
    full circle onto the quarter, so each azimuth node carries weight
    2*pi/n_quarter.  Weights integrate over the full sphere: sum = 4*pi."""

    mu_nodes: np.ndarray      # |eta3| > 0, per hemisphere
    mu_weights: np.ndarray
    zeta_nodes: np.ndarray    # quarter circle (0, pi/2)
    zeta_weights: np.ndarray  # full-circle weights (sum = 2*pi)

    def __post_init__(self):
        if np.any(self.mu_nodes <= 0) or np.any(self.mu_nodes >= 1):
            raise ValueError("vertical cosines must lie strictly in (0, 1)")
        total = 2.0 * self.mu_weights.sum() * self.zeta_weights.sum()
        if abs(total - 4.0 * np.pi) > 1e-12 * 4.0 * np.pi:
            raise ValueError("ordinate weights must integrate to 4*pi")

    @property
    def per_hemisphere(self) -> int:
        return len(self.mu_nodes) * len(self.zeta_nodes)

    def cache_key(self):
        return (len(self.mu_nodes), len(self.zeta_nodes),
                float(self.mu_nodes[0]))


#: Smallest resolved vertical cosine; grazing directions below this are
#: attenuation-dominated and their residual error is repaired by the
#: exact zero-wavenumber subtraction in the operator assembly.
_MU_MIN = 1e-4

#: Geometric growth factor of the vertical-cosine panels.  The
#: transport kernels vary on the relative scale dmu/mu (oscillation
#: frequency and attenuation both go like 1/mu), so panels must be
#: log-uniform rather than uniform.
_MU_RATIO = 2.0


def build_ordinates(n_mu: int = 16, n_zeta: int = 16) -> OrdinateSet:
    """Angular rule per hemisphere: graded vertical-cosine Gauss panels
    times quarter-circle azimuth midpoints.

    Azimuth symmetry folds the full circle onto a quarter, freeing
    three quarters of a product rule's ray budget: the quarter circle
    keeps n_zeta/2 Gauss nodes graded cubically toward zeta = pi/2
    (grazing rays perpendicular to the wavevector see a near-pole of
    width ~ attenuation/(a sin alpha) in cos zeta) and the vertical
    cosine gets 2*n_mu Gauss nodes on geometrically graded panels,
    where the kernels actually vary.
    """
    total = max(8, 2 * n_mu)
    bounds = [0.0, _MU_MIN]
    while bounds[-1] < 1.0:
        bounds.append(min(1.0, bounds[-1] * _MU_RATIO))
    npanels = len(bounds) - 1
    base, extra = divmod(total, npanels)
    mu_parts, w_parts = [], []
    for k, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
        per = max(2, base + (1 if k < extra else 0))
        nodes, weights = np.polynomial.legendre.leggauss(per)
        half = 0.5 * (hi - lo)
        mu_parts.append(lo + half * (nodes + 1.0))
        w_parts.append(half * weights)
    n_q = max(4, n_zeta // 2)
    s, ws = np.polynomial.legendre.leggauss(n_q)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    p = 3
    zeta = 0.5 * np.pi * (1.0 - s ** p)
    w_zeta = 2.0 * np.pi * p * ws * s ** (p - 1)
    order = np.argsort(zeta)
    return OrdinateSet(np.concatenate(mu_parts), np.concatenate(w_parts),
                       zeta[order], w_zeta[order])


@dataclass(frozen=True)
class PerturbedRadiationOperators:
    """Dense complex mesh-to-mesh operators acting on N-samples."""

    a: float
    x3: np.ndarray
    map_Gc: np.ndarray
    map_Gd: np.ndarray
    map_q1: np.ndarray
    map_q2: np.ndarray
    map_q3: np.ndarray
    ordinates: OrdinateSet = field(repr=False, default=None)

    @property
    def map_G(self) -> np.ndarray:
        return self.map_Gc + self.map_Gd


def perturbed_collimated_map(state: BasicState):
    """Closed-form collimated response: G*c = (tau_h/cos a0) G_b^c N and
    its (signed, upward-positive) vertical flux q3_hat^c = -cos a0 G*c."""
    mu0 = np.cos(state.params.refraction_angle)
    coef = state.params.optical_depth / mu0
    map_gc = np.diag(coef * state.radiation.g_collimated)
    return map_gc, -mu0 * map_gc


# ----------------------------------------------------------------------
# Fine transport grid data
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class _FineData:
    x3: np.ndarray
    h: float
    index_of_mesh: np.ndarray
    prolong: np.ndarray        # mesh -> fine spline interpolation matrix
    n_b: np.ndarray
    n_b_cell_mean: np.ndarray
    tau: np.ndarray            # optical depth at the fine nodes (decreasing)
    g_b: np.ndarray
    q_b: np.ndarray
    g_bc: np.ndarray


def _fine_data(state: BasicState) -> _FineData:
    x3 = state.x3
    n = len(x3)
    factor = max(1, round(TRANSPORT_INTERVALS / (n - 1)))
    n_f = factor * (n - 1) + 1
    x3_f = np.linspace(0.0, 1.0, n_f)
    spline = CubicSpline(x3, state.n_b)
    cum = spline.antiderivative()
    n_b_f = spline(x3_f)
    cell_mean = np.diff(cum(x3_f)) / (x3_f[1] - x3_f[0])
    tau_f = state.params.optical_depth * (cum(1.0) - cum(x3_f))
    tau_f = np.maximum(tau_f, 0.0)
    g_interp, q_interp = state.tau_solution.interpolators()
    mu0 = np.cos(state.params.refraction_angle)
    g_bc = state.params.intensity * np.exp(-tau_f / mu0)
    prolong = CubicSpline(x3, np.eye(n), axis=0)(x3_f)
    return _FineData(
        x3=x3_f, h=x3_f[1] - x3_f[0],
        index_of_mesh=np.arange(0, n_f, factor),
        prolong=prolong,
        n_b=n_b_f, n_b_cell_mean=cell_mean, tau=tau_f,
        g_b=g_interp(tau_f), q_b=q_interp(tau_f), g_bc=g_bc)


# ----------------------------------------------------------------------
# Exponential upwind sweeps
# ----------------------------------------------------------------------

def _phi_coefficients(kappa: np.ndarray):
    """phi0 = (1-e^-k)/k and phi1 = (1-phi0)/k, stable for small |k|.

    Works for complex k with Re k >= 0 (horizontal phase folded into
    the attenuation rate).
    """
    small = np.abs(kappa) < 1e-3
    safe = np.where(small, 1.0, kappa)
    phi0 = (1.0 - np.exp(-safe)) / safe
    phi1 = (1.0 - phi0) / safe
    k = kappa
    phi0_s = 1.0 - k / 2.0 + k ** 2 / 6.0 - k ** 3 / 24.0 + k ** 4 / 120.0
    phi1_s = 0.5 - k / 6.0 + k ** 2 / 24.0 - k ** 3 / 120.0 + k ** 4 / 720.0
    return np.where(small, phi0_s, phi0), np.where(small, phi1_s, phi1)


def _sweep(upward: bool, kappa: np.ndarray, h: float, inv_eta3: np.ndarray,
           u_prof: np.ndarray, v_prof: np.ndarray,
           w_prof: np.ndarray | None, b_coef: np.ndarray | None,
           moment_weights: np.ndarray, record: bool = False):
    """March the ordinate ODEs through the slab, accumulating angular
    moments at every node.

    The per-cell update is the exact solution for a source varying
    linearly within the cell and the cell-mean attenuation coefficient:
    psi_next = psi e^{-kappa} +- h [s_prev (phi0 - phi1) + s_next phi1].
    Source layout: s = (1/eta3) u + v + b w, where u, v, w are
    per-column node profiles and b is a per-ordinate profile.
    """
    n_o, n_cells = kappa.shape
    n_f = n_cells + 1
    n_col = u_prof.shape[1]
    phi0, phi1 = _phi_coefficients(kappa)
    sign = 1.0 if upward else -1.0
    c_prev = sign * h * (phi0 - phi1)
    c_cur = sign * h * phi1
    emz = np.exp(-kappa)

    def source(j):
        s = inv_eta3[:, None] * u_prof[j][None, :] + v_prof[j][None, :]
        if w_prof is not None:
            s = s + b_coef[:, j][:, None] * w_prof[j][None, :]
        return s

    moments = np.zeros((moment_weights.shape[0], n_f, n_col), dtype=complex)
    recorded = np.zeros((n_o, n_f), dtype=complex) if record else None
    psi = np.zeros((n_o, n_col), dtype=complex)
    nodes = range(1, n_f) if upward else range(n_f - 2, -1, -1)
    s_prev = source(0 if upward else n_f - 1)
    for j in nodes:
        c = j - 1 if upward else j
        s_cur = source(j)
        psi = (psi * emz[:, c][:, None]
               + c_prev[:, c][:, None] * s_prev + c_cur[:, c][:, None] * s_cur)
        moments[:, j, :] = moment_weights @ psi
        if record:
            recorded[:, j] = psi[:, 0]
        s_prev = s_cur
    return moments, recorded


def _basic_diffuse_intensity(state: BasicState, fine: _FineData,
                             mu: np.ndarray):
    """Basic diffuse intensity I_b^d(x3, eta3) per hemisphere ordinate,
    by the same sweeps driven with the equilibrium source."""
    params = state.params
    k1 = params.albedo * params.optical_depth / (4.0 * np.pi)
    u_b = (k1 * fine.n_b * fine.g_b)[:, None]
    v_b = (-k1 * params.aniso * fine.n_b * fine.q_b)[:, None]
    h = fine.h
    kap = np.outer(1.0 / mu, params.optical_depth * fine.n_b_cell_mean * h)
    w_row = np.zeros((1, len(mu)))
    out = {}
    for upward in (True, False):
        inv = (1.0 / mu) if upward else (-1.0 / mu)
        _, psi = _sweep(upward, kap.astype(complex), h, inv, u_b, v_b,
                        None, None, w_row, record=True)
        out[upward] = psi.real
    return out[True], out[False]


# ----------------------------------------------------------------------
# Operator factory
# ----------------------------------------------------------------------

class RadiationOperatorFactory:
    """Builds PerturbedRadiationOperators for one basic state.

    All wavenumber-independent work (fine-grid data, basic diffuse
    intensity along the ordinates, the zero-wavenumber sweep moments and
    their exact product-integration counterparts) happens once in the
    constructor; ``operators(a)`` then costs a single sweep pass.
    """

    def __init__(self, state: BasicState, ordinates: OrdinateSet | None = None):
        self.state = state
        params = state.params
        x3 = state.x3
        n = self.n = len(x3)
        if ordinates is None:
            ordinates = build_ordinates(state.numerics.ordinates_per_hemisphere,
                                        state.numerics.azimuthal_points)
        self.ordinates = ordinates
        self.mu0 = np.cos(params.refraction_angle)
        self.map_gc, _ = perturbed_collimated_map(state)
        if params.albedo == 0.0:
            return

        fine = self.fine = _fine_data(state)
        n_f = len(fine.x3)
        m = self.m = CLOSURE_MODES

        # smooth global trial basis (Chebyshev on [0, 1]); localized
        # (cardinal) columns would behave as near-point sources whose
        # angular response oscillates and ruins ordinate convergence
        s_mesh = 2.0 * x3 - 1.0
        s_fine = 2.0 * fine.x3 - 1.0
        p_mesh = np.polynomial.chebyshev.chebvander(s_mesh, m - 1)
        p_fine = np.polynomial.chebyshev.chebvander(s_fine, m - 1)
        dp_fine = np.zeros_like(p_fine)
        for k in range(1, m):
            coef = np.zeros(k + 1)
            coef[k] = 1.0
            dp_fine[:, k] = 2.0 * np.polynomial.chebyshev.chebval(
                s_fine, np.polynomial.chebyshev.chebder(coef))
        self._p_mesh, self._p_fine = p_mesh, p_fine
        self._fit = np.linalg.pinv(p_mesh)           # mesh samples -> coeffs

        # column sources: [G*d basis cols | q3_hat^d basis cols | N basis cols]
        k1 = params.albedo * params.optical_depth / (4.0 * np.pi)
        k2 = k1 * params.aniso
        u = np.zeros((n_f, 3 * m))
        v = np.zeros((n_f, 3 * m))
        w = np.zeros((n_f, 3 * m))
        u[:, :m] = k1 * fine.n_b[:, None] * p_fine
        v[:, m:2 * m] = k2 * fine.n_b[:, None] * p_fine

        gc_f = (params.optical_depth / self.mu0) * fine.g_bc[:, None] * p_fine
        u[:, 2 * m:] = k1 * (fine.n_b[:, None] * gc_f
                             + fine.g_b[:, None] * dp_fine)
        v[:, 2 * m:] = k2 * (-self.mu0 * fine.n_b[:, None] * gc_f
                             - fine.q_b[:, None] * dp_fine)
        w[:, 2 * m:] = dp_fine
        self._u, self._v, self._w = u, v, w

        self._ibd = _basic_diffuse_intensity(state, fine, ordinates.mu_nodes)
        self._zero_sweep = self._sweep_moments(0.0)
        self._zero_exact = self._exact_zero_moments()

    # -- transport kernel pass -------------------------------------------

    def _sweep_moments(self, a: float) -> np.ndarray:
        """Angular moments (G, q1, q3) at the mesh rows, per column.

        Along a ray (mu, zeta) the horizontal perturbation phase
        exp(-i a eta1 dx3/eta3) joins the optical attenuation as an
        imaginary part of the decay rate, so each ray is marched with
        the exact linear-source exponential updates of `_sweep` - the
        kernel is integrated analytically within every cell, which
        keeps the march uniformly accurate down to grazing mu where
        both the decay and the phase rotate arbitrarily fast on the
        grid scale.

        Azimuth folds onto the quarter circle: rays at -cos(zeta)
        carry the conjugate intensity, so for the azimuth-even moments
        (G, q3) the full-circle sum is the real part and for the
        cos(zeta)-odd moment q1 it is i times the imaginary part.  The
        q1 row therefore stores the real amplitude sum of
        -Im psi * sin(alpha) cos(zeta); the physical operator is -i
        times it.  q2_hat (the sin(zeta) moment) vanishes identically.
        """
        fine = self.fine
        params = self.state.params
        h = fine.h
        idx = fine.index_of_mesh
        mu = self.ordinates.mu_nodes
        wmu = self.ordinates.mu_weights
        zc = np.cos(self.ordinates.zeta_nodes)
        n_q = len(zc)
        s_h = np.sqrt(np.maximum(1.0 - mu ** 2, 0.0))

        # ray arrays: mu-major, azimuth-minor
        mu_r = np.repeat(mu, n_q)
        s_r = np.repeat(s_h, n_q)
        zc_r = np.tile(zc, len(mu))
        w_ray = np.repeat(wmu, n_q) * np.tile(self.ordinates.zeta_weights,
                                              len(mu))

        dtau_cell = params.optical_depth * fine.n_b_cell_mean * h
        moments = np.zeros((3, len(idx), self._u.shape[1]))
        for upward in (True, False):
            sgn = 1.0 if upward else -1.0
            kappa = (dtau_cell[None, :]
                     + (1j * a * h) * (s_r * zc_r)[:, None]) / mu_r[:, None]
            ibd = self._ibd[0] if upward else self._ibd[1]
            b = -params.optical_depth * np.repeat(ibd, n_q, axis=0) \
                / (sgn * mu_r[:, None])
            weights = np.vstack([w_ray,
                                 w_ray * s_r * zc_r,
                                 w_ray * sgn * mu_r])
            mom, _ = _sweep(upward, kappa, h, sgn / mu_r, self._u, self._v,
                            self._w, b, weights)
            moments[0] += mom[0, idx].real
            moments[1] -= mom[1, idx].imag
            moments[2] += mom[2, idx].real
        return moments

    # -- exact zero-wavenumber moments ---------------------------------

    def _thickness_sensitivity(self, tau: np.ndarray):
        """Sensitivity of the diffuse equilibrium profiles to the total
        optical thickness of the slab, d G_d / d tau_total and
        d Q_d / d tau_total at fixed tau, by central differencing two
        equilibrium solves (Q_d positive downward)."""
        params = self.state.params
        tau_total = float(self.fine.tau[0])
        step = 1e-4 * max(tau_total, 1.0)
        sigma = tau / tau_total
        vals = []
        for tt in (tau_total + step, tau_total - step):
            sol = solve_fredholm_pair(
                tt, params.albedo, params.aniso, params.refraction_angle,
                intensity=params.intensity,
                n_quad=self.state.numerics.tau_quadrature_points)
            g_c = params.intensity * np.exp(-sol.tau / self.mu0)
            g_d = CubicSpline(sol.tau, sol.g_total - g_c)
            q_d = CubicSpline(sol.tau, sol.q_total - self.mu0 * g_c)
            vals.append((g_d(sigma * tt), q_d(sigma * tt)))
        (g_hi, q_hi), (g_lo, q_lo) = vals
        return ((g_hi - g_lo) / (2.0 * step), (q_hi - q_lo) / (2.0 * step))

    def _exact_zero_moments(self):
        """(G, q3) moment responses at a = 0, computed exactly.

        Unit-moment columns: the azimuth integrates out at zero
        wavenumber and the vertical cosine integrals give
        exponential-integral kernels in tau,
            G(tau)  = 2pi  int [ u~ E1(|dt|) - sgn(t'-t) v~ E2(|dt|) ] dt'
            q3(tau) = 2pi  int [ -sgn(t'-t) u~ E2(|dt|) + v~ E3(|dt|) ] dt'
        with u~ = u/(tau_h n_b), v~ = v/(tau_h n_b) converting the depth
        measure dx3 to the optical measure dtau, handled by the same
        product-integration weights as the equilibrium solve.

        N columns: a horizontally uniform perturbation remaps the
        optical depth, tau -> tau - tau_h N(x3) to first order, and -
        through its net mass - changes the total optical thickness of
        the slab, tau_total -> tau_total - tau_h N(0), on which the
        diffuse solution also depends (the lower boundary moves in the
        optical coordinate).  Writing the diffuse profiles in the
        relative depth sigma = tau/tau_total, where the boundary
        layers of slabs of different thickness align and the thickness
        sensitivity is smooth,
            dG_d  = -tau_h (N - sigma N(0)) dG_d/dtau
                    - tau_h N(0) dG_d/dtau_total |_sigma,
            dq3_d = +tau_h (N - sigma N(0)) dQ_d/dtau
                    + tau_h N(0) dQ_d/dtau_total |_sigma
        (q3 counted positive upward, Q_d the downward diffuse flux),
        with the sigma-sensitivities obtained by differencing two
        equilibrium solves.  The forcing columns follow as
        (identity - L) applied to those closed-form profiles, with the
        L-action again evaluated by product integration on the fine
        grid.
        """
        fine = self.fine
        params = self.state.params
        m = self.m
        tau_asc = fine.tau[::-1].copy()       # ascending optical depth
        w1, w2s, w3 = fredholm_weights(tau_asc)
        rows = (len(fine.x3) - 1) - fine.index_of_mesh
        scale = 1.0 / (params.optical_depth * fine.n_b)

        def respond(u_cols, v_cols):
            ut = (u_cols * scale[:, None])[::-1]
            vt = (v_cols * scale[:, None])[::-1]
            # `rows` is already ordered by mesh index (the reversal is
            # folded into the index arithmetic above)
            g = 2.0 * np.pi * (w1[rows] @ ut - w2s[rows] @ vt)
            q3 = 2.0 * np.pi * (-w2s[rows] @ ut + w3[rows] @ vt)
            return g, q3

        g_unit, q3_unit = respond(self._u[:, :2 * m], self._v[:, :2 * m])

        g_interp, q_interp = self.state.tau_solution.interpolators()
        g_c = params.intensity * np.exp(-fine.tau / self.mu0)
        dgd_dtau = g_interp.derivative()(fine.tau) + g_c / self.mu0
        dqd_dtau = q_interp.derivative()(fine.tau) + g_c
        dgd_dtot, dqd_dtot = self._thickness_sensitivity(fine.tau)
        n_at_bottom = self._p_fine[0]      # N(x3=0) per basis column
        sigma = fine.tau / float(fine.tau[0])
        shift = self._p_fine - sigma[:, None] * n_at_bottom[None, :]
        delta_g = ((-params.optical_depth * dgd_dtau)[:, None] * shift
                   + (-params.optical_depth * dgd_dtot)[:, None]
                   * n_at_bottom[None, :])
        delta_q3 = ((params.optical_depth * dqd_dtau)[:, None] * shift
                    + (params.optical_depth * dqd_dtot)[:, None]
                    * n_at_bottom[None, :])
        k1 = params.albedo * params.optical_depth / (4.0 * np.pi)
        k2 = k1 * params.aniso
        lg, lq3 = respond(k1 * fine.n_b[:, None] * delta_g,
                          k2 * fine.n_b[:, None] * delta_q3)
        idx = fine.index_of_mesh
        g_rows = np.hstack([g_unit, delta_g[idx] - lg])
        q3_rows = np.hstack([q3_unit, delta_q3[idx] - lq3])
        return g_rows, q3_rows

    # -- public assembly -------------------------------------------------

    def operators(self, a: float) -> PerturbedRadiationOperators:
        n = self.n
        params = self.state.params
        if params.albedo == 0.0:
            zero = np.zeros((n, n), dtype=complex)
            return PerturbedRadiationOperators(
                a=float(a), x3=self.state.x3,
                map_Gc=self.map_gc.astype(complex), map_Gd=zero,
                map_q1=zero.copy(), map_q2=zero.copy(),
                map_q3=(-self.mu0 * self.map_gc).astype(complex),
                ordinates=self.ordinates)

        m = self.m
        moments = self._sweep_moments(a) - self._zero_sweep
        g_m = moments[0] + self._zero_exact[0]
        q1_m = moments[1]
        q3_m = moments[2] + self._zero_exact[1]

        # resolvent closure in coefficient space: (I - L) x = m0, where
        # L takes trial coefficients of (G*d, q3_hat^d) to the fitted
        # coefficients of their scattered response
        fit = self._fit
        lmat = np.block([[fit @ g_m[:, :m], fit @ g_m[:, m:2 * m]],
                         [fit @ q3_m[:, :m], fit @ q3_m[:, m:2 * m]]])
        m0 = np.vstack([fit @ g_m[:, 2 * m:], fit @ q3_m[:, 2 * m:]])
        x = np.linalg.solve(np.eye(2 * m) - lmat, m0)

        map_gd = ((g_m[:, :2 * m] @ x + g_m[:, 2 * m:]) @ fit).astype(complex)
        map_q3d = (q3_m[:, :2 * m] @ x + q3_m[:, 2 * m:]) @ fit
        map_q1 = -1j * ((q1_m[:, :2 * m] @ x + q1_m[:, 2 * m:]) @ fit)
        map_q2 = np.zeros_like(map_q1)
        map_q3 = (map_q3d - self.mu0 * self.map_gc).astype(complex)

        return PerturbedRadiationOperators(
            a=float(a), x3=self.state.x3,
            map_Gc=self.map_gc.astype(complex), map_Gd=map_gd,
            map_q1=map_q1, map_q2=map_q2, map_q3=map_q3,
            ordinates=self.ordinates)


_FACTORY_CACHE: dict = {}


def assemble_diffuse_operators(state: BasicState, a: float,
                               ordinates: OrdinateSet | None = None
                               ) -> PerturbedRadiationOperators:
    """Build the mesh operators N -> (G*, q1_hat, q2_hat, q3_hat) at
    in-plane wavevector (a, 0), reusing cached wavenumber-independent
    factors for repeated calls with the same basic state."""
    key = (id(state), None if ordinates is None else ordinates.cache_key())
    entry = _FACTORY_CACHE.get(key)
    if entry is None or entry.state is not state:
        entry = RadiationOperatorFactory(state, ordinates)
        _FACTORY_CACHE.clear()      # keep at most one state resident
        _FACTORY_CACHE[key] = entry
    return entry.operators(a)
