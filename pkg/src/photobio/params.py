"""Physical and dimensionless control parameters.

Everything downstream consumes :class:`SuspensionParams`; the taxis
response T(G) and its derivative live here because the calibration
between the steepness parameter upsilon and the critical intensity G_c
is a pure root-finding exercise on T.
"""

from __future__ import annotations

import math
import sys
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

WATER_REFRACTIVE_INDEX = 1.333

#: Search window for the first zero of the taxis function.
G_SEARCH_MAX = 10.0
#: Search window for upsilon when calibrating to a target G_c.
UPSILON_BRACKET = (0.01, 5.0)


class NoRootError(ValueError):
    """Raised when a calibration root cannot be bracketed."""


def snell_refract(alpha_i_deg: float, n0: float = WATER_REFRACTIVE_INDEX) -> float:
    """Refraction angle (radians) for incidence angle alpha_i (degrees)."""
    if not 0.0 <= alpha_i_deg < 90.0:
        raise ValueError(f"incidence angle must be in [0, 90), got {alpha_i_deg}")
    if n0 < 1.0:
        raise ValueError("refractive index must be >= 1")
    return math.asin(math.sin(math.radians(alpha_i_deg)) / n0)


def taxis_value(g, upsilon: float):
    """Taxis response T(G) = 0.8 sin(1.5 pi phi) - 0.1 sin(0.5 pi phi),
    phi(G) = 0.4 G exp(upsilon (2.5 - G)).  Bounded by 0.9 in magnitude."""
    g = np.asarray(g, dtype=float)
    phi = 0.4 * g * np.exp(upsilon * (2.5 - g))
    t = 0.8 * np.sin(1.5 * np.pi * phi) - 0.1 * np.sin(0.5 * np.pi * phi)
    return float(t) if t.ndim == 0 else t


def taxis_derivative(g, upsilon: float):
    """dT/dG by the chain rule; dphi/dG = 0.4 e^{upsilon(2.5-G)} (1 - upsilon G)."""
    g = np.asarray(g, dtype=float)
    phi = 0.4 * g * np.exp(upsilon * (2.5 - g))
    dphi = 0.4 * np.exp(upsilon * (2.5 - g)) * (1.0 - upsilon * g)
    dt = (1.2 * np.pi * np.cos(1.5 * np.pi * phi)
          - 0.05 * np.pi * np.cos(0.5 * np.pi * phi)) * dphi
    return float(dt) if dt.ndim == 0 else dt


def calibrate_critical_intensity(upsilon: float) -> float:
    """Smallest G > 0 where T(G; upsilon) changes sign (bisection to 1e-10)."""
    if upsilon <= 0:
        raise ValueError("upsilon must be positive")
    grid = np.linspace(0.0, G_SEARCH_MAX, 4001)[1:]
    t = taxis_value(grid, upsilon)
    flips = np.nonzero(t[:-1] * t[1:] < 0)[0]
    if len(flips) == 0:
        raise NoRootError(f"taxis function has no sign change on "
                          f"(0, {G_SEARCH_MAX}] for upsilon={upsilon}")
    k = flips[0]
    return brentq(lambda x: taxis_value(x, upsilon), grid[k], grid[k + 1],
                  xtol=1e-10, rtol=1e-14)


def calibrate_upsilon(g_c_target: float) -> float:
    """Upsilon whose first taxis zero sits at g_c_target (within 1e-6)."""
    if g_c_target <= 0:
        raise ValueError("target critical intensity must be positive")

    def mismatch(u):
        return calibrate_critical_intensity(u) - g_c_target

    lo, hi = UPSILON_BRACKET
    n_scan = 50
    us = [lo + (hi - lo) * k / n_scan for k in range(n_scan + 1)]
    vals = []
    for u in us:
        try:
            vals.append(mismatch(u))
        except NoRootError:
            vals.append(None)
    for (u0, v0), (u1, v1) in zip(zip(us, vals), zip(us[1:], vals[1:])):
        if v0 is None or v1 is None:
            continue
        if v0 == 0:
            return u0
        if v0 * v1 < 0:
            return brentq(mismatch, u0, u1, xtol=1e-9, rtol=1e-12)
    raise NoRootError(
        f"no upsilon in {UPSILON_BRACKET} yields critical intensity {g_c_target}")


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional suspension data (CGS units)."""

    kinematic_viscosity: float   # cm^2/s
    cell_diffusivity: float      # cm^2/s
    mean_concentration: float    # cells/cm^3
    cell_swim_speed: float       # cm/s
    cell_volume: float           # cm^3
    density_ratio: float         # delta rho / rho
    cell_radius: float           # cm
    depth: float                 # cm
    gravity: float = 981.0       # cm/s^2
    fluid_density: float = 1.0   # g/cm^3

    def __post_init__(self):
        for name, value in vars(self).items():
            if value <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.density_ratio > 0.2:
            warnings.warn("density_ratio > 0.2 stretches the Boussinesq "
                          "dilute-suspension assumptions", stacklevel=2)

    @property
    def schmidt(self) -> float:
        return self.kinematic_viscosity / self.cell_diffusivity

    @property
    def swim_speed(self) -> float:
        return self.cell_swim_speed * self.depth / self.cell_diffusivity

    @property
    def rayleigh(self) -> float:
        mu = self.fluid_density * self.kinematic_viscosity
        return (self.mean_concentration * self.cell_volume * self.density_ratio
                * self.fluid_density * self.gravity * self.depth ** 3
                / (mu * self.cell_diffusivity))


@dataclass(frozen=True)
class SuspensionParams:
    """Dimensionless control parameters of the stability problem.

    Angles are accepted in degrees at the interface and stored alongside
    the refraction angle in radians.  `critical_intensity` is a derived
    reporting label: the physics only consumes T(G; upsilon).
    """

    schmidt: float = 20.0
    swim_speed: float = 10.0
    rayleigh: float = 500.0
    optical_depth: float = 1.0
    albedo: float = 0.5
    aniso: float = 0.0
    incidence_angle_deg: float = 0.0
    beam_azimuth: float = 0.0
    intensity: float = 1.0
    upsilon: float = 0.4
    iota: float = field(default=0.0, init=False)  # collimated light: always 0

    def __post_init__(self):
        if not 0.0 <= self.albedo <= 1.0:
            raise ValueError("albedo must lie in [0, 1]")
        if not -1.0 <= self.aniso <= 1.0:
            raise ValueError("anisotropy coefficient must lie in [-1, 1]")
        if self.optical_depth <= 0:
            raise ValueError("optical depth must be positive")
        if self.swim_speed < 0:
            raise ValueError("swim speed must be non-negative")
        if not 0.0 <= self.incidence_angle_deg <= 80.0:
            raise ValueError("incidence angle must lie in [0, 80] degrees")

    @property
    def refraction_angle(self) -> float:
        return snell_refract(self.incidence_angle_deg)

    @property
    def critical_intensity(self) -> float:
        return calibrate_critical_intensity(self.upsilon)

    def with_rayleigh(self, rayleigh: float) -> "SuspensionParams":
        return replace(self, rayleigh=rayleigh)

    def taxis(self, g):
        return taxis_value(g, self.upsilon)

    def taxis_slope(self, g):
        return taxis_derivative(g, self.upsilon)


@dataclass(frozen=True)
class NumericsConfig:
    mesh_points: int = 101
    tau_quadrature_points: int = 101
    ordinates_per_hemisphere: int = 16
    azimuthal_points: int = 16
    picard_tol: float = 1e-8
    picard_relaxation: float = 0.5
    picard_max_iter: int = 500
    eigen_tol: float = 1e-8
    neutral_tol: float = 1e-6

    def __post_init__(self):
        if self.mesh_points < 51:
            raise ValueError("mesh_points must be at least 51")
        if not 0.0 < self.picard_relaxation <= 1.0:
            raise ValueError("picard_relaxation must lie in (0, 1]")


class ConfigError(ValueError):
    """Malformed or inconsistent TOML configuration."""


def load_config(path) -> tuple[SuspensionParams, NumericsConfig]:
    """Read `[suspension]` and `[numerics]` sections from a TOML file.

    Exactly one of `upsilon` / `g_c` must be present; a `g_c` label is
    converted to upsilon by calibration.
    """
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    susp = raw.get("suspension", {})
    if not isinstance(susp, dict):
        raise ConfigError("[suspension] must be a table")
    has_upsilon = "upsilon" in susp
    has_gc = "g_c" in susp
    if has_upsilon == has_gc:
        raise ConfigError("specify exactly one of 'upsilon' or 'g_c' in [suspension]")
    try:
        upsilon = (float(susp["upsilon"]) if has_upsilon
                   else calibrate_upsilon(float(susp["g_c"])))
    except NoRootError as exc:
        raise ConfigError(str(exc)) from exc

    key_map = {
        "sc": "schmidt",
        "us": "swim_speed",
        "ra": "rayleigh",
        "tau_h": "optical_depth",
        "omega": "albedo",
        "aniso_a": "aniso",
        "alpha_i_deg": "incidence_angle_deg",
        "i0": "intensity",
        "beam_azimuth": "beam_azimuth",
    }
    kwargs = {"upsilon": upsilon}
    for key, value in susp.items():
        if key in ("upsilon", "g_c"):
            continue
        if key not in key_map:
            raise ConfigError(f"unknown key [suspension].{key}")
        kwargs[key_map[key]] = float(value)
    try:
        params = SuspensionParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    num_raw = raw.get("numerics", {})
    if not isinstance(num_raw, dict):
        raise ConfigError("[numerics] must be a table")
    valid = set(NumericsConfig.__dataclass_fields__)
    unknown = set(num_raw) - valid
    if unknown:
        raise ConfigError(f"unknown keys in [numerics]: {sorted(unknown)}")
    try:
        numerics = NumericsConfig(**num_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return params, numerics
