"""Equilibrium and linear stability of phototactic algal suspensions
under oblique collimated irradiation with forward-anisotropic scattering."""

from .basic_state import (BasicState, NoConvergenceError,
                          locate_critical_crossings, solve_basic_state)
from .params import (ConfigError, NumericsConfig, PhysicalParams,
                     SuspensionParams, calibrate_critical_intensity,
                     calibrate_upsilon, load_config)
from .perturbed import assemble_diffuse_operators
from .radiative import solve_fredholm_pair
from .stability import (CriticalResult, ModeResult, NeutralCurve,
                        NeutralPoint, NoBracket, eigenmode_snapshots,
                        find_critical, growth_rate, neutral_ra,
                        trace_neutral_curve)

__version__ = "0.1.0"

__all__ = [
    "BasicState", "ConfigError", "CriticalResult", "ModeResult",
    "NeutralCurve", "NeutralPoint", "NoBracket", "NoConvergenceError",
    "NumericsConfig", "PhysicalParams", "SuspensionParams",
    "assemble_diffuse_operators", "calibrate_critical_intensity",
    "calibrate_upsilon", "eigenmode_snapshots", "find_critical",
    "growth_rate", "load_config", "locate_critical_crossings",
    "neutral_ra", "solve_basic_state", "solve_fredholm_pair",
    "trace_neutral_curve",
]
