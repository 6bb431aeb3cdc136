"""Gravitating vortices on the 2-sphere: spectral solver, continuation in the
coupling constant, a priori estimate checks and the Futaki obstruction."""

from .config import SolverConfig
from .coupled import ContinuationReport, continue_path, initial_state, residual, residual_norms, solve_at_alpha
from .divisor import Divisor, StabilityClass, antipodal, classify, equatorial, is_admissible
from .errors import ArgumentError, ConfigurationError, GravVortexError, InfeasibleError, NumericalError
from .estimates import EstimateReport, run_all
from .futaki import FutakiResult, ZonalPair, extremal_residual, futaki_closed, futaki_quadrature
from .sphere_spectral import ScalarField, SphereGrid, make_grid
from .state import SolutionState

__version__ = "0.1.0"

__all__ = [
    "SolverConfig",
    "ContinuationReport",
    "continue_path",
    "initial_state",
    "residual",
    "residual_norms",
    "solve_at_alpha",
    "Divisor",
    "StabilityClass",
    "antipodal",
    "classify",
    "equatorial",
    "is_admissible",
    "ArgumentError",
    "ConfigurationError",
    "GravVortexError",
    "InfeasibleError",
    "NumericalError",
    "EstimateReport",
    "run_all",
    "FutakiResult",
    "ZonalPair",
    "extremal_residual",
    "futaki_closed",
    "futaki_quadrature",
    "ScalarField",
    "SphereGrid",
    "make_grid",
    "SolutionState",
]
