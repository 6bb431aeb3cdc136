"""Solver configuration shared by the vortex and coupled solvers."""

from dataclasses import asdict, dataclass, replace

from .errors import ConfigurationError
from .sphere_spectral import MIN_DEGREE


@dataclass(frozen=True)
class SolverConfig:
    """Numerical parameters for Newton solves and alpha-continuation.

    Parameters
    ----------
    L : int
        Spectral degree of the working grid.
    newton_tol : float
        Sup-norm target for every residual component.
    max_iter : int
        Newton iterations allowed per solve.
    linear_tol : float
        Relative tolerance of the inner Krylov solves.
    min_damping : float
        Smallest accepted line-search step before declaring stagnation.
    initial_step, shrink, grow, min_step, max_step : float
        Continuation step policy, in units of ``1/(tau N)``.
    sigma_degree : int
        Degree of the Galerkin compression used for the smallest singular
        value diagnostic (0 disables it).
    """

    L: int = 64
    newton_tol: float = 1e-10
    max_iter: int = 40
    linear_tol: float = 1e-12
    max_linear_iter: int = 400
    min_damping: float = 1.0 / 1024
    initial_step: float = 0.05
    shrink: float = 0.5
    grow: float = 1.5
    min_step: float = 1e-3
    max_step: float = 0.15
    sigma_degree: int = 12
    seed: int = 0

    def __post_init__(self):
        if int(self.L) != self.L or self.L < MIN_DEGREE:
            raise ConfigurationError(f"L must be an integer >= {MIN_DEGREE}")
        for name in ("newton_tol", "linear_tol", "min_damping", "initial_step", "min_step", "max_step"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if not 0 < self.shrink < 1 or self.grow < 1:
            raise ConfigurationError("need 0 < shrink < 1 <= grow")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be >= 1")

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)
