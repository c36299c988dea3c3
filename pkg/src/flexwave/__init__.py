"""Solitary waves on a floating elastic sheet, computed as constrained energy minimisers."""

from .dispersion import WaveContext, eval_f, eval_g, gamma0_from_k0, k0_from_gamma, nu
from .dn import DnConfig, dn_apply, dn_inverse, dn_oracle
from .errors import (
    ConfigError,
    ConstrainedBoundaryError,
    ConvergenceError,
    DefocussingError,
    DomainError,
    FlexwaveError,
    ImplementationDefect,
    ResolutionError,
    SolverError,
    TruncationError,
)
from .functionals import FunctionalReport, eval_J, eval_K, eval_L, grad_J, grad_K, grad_L
from .grid import Grid, PeriodicProfile
from .nls import NlsCoefficients, focussing_threshold, nls_coefficients, test_profile, zeta_nls

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ConstrainedBoundaryError", "ConvergenceError", "DefocussingError", "DnConfig",
    "DomainError", "FlexwaveError", "FunctionalReport", "Grid", "ImplementationDefect", "NlsCoefficients",
    "PeriodicProfile", "ResolutionError", "SolverError", "TruncationError", "WaveContext", "dn_apply",
    "dn_inverse", "dn_oracle", "eval_J", "eval_K", "eval_L", "eval_f", "eval_g", "focussing_threshold",
    "gamma0_from_k0", "grad_J", "grad_K", "grad_L", "k0_from_gamma", "nls_coefficients", "nu",
    "test_profile", "zeta_nls",
]
