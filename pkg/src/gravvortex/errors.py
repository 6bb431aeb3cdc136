"""Exception hierarchy shared by the solver modules."""


class GravVortexError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GravVortexError, ValueError):
    """Invalid grid degree, tolerance or other configuration value."""


class ArgumentError(GravVortexError, ValueError):
    """An argument violates an operation precondition."""


class InfeasibleError(GravVortexError):
    """The requested problem has no solution (e.g. the vortex threshold fails)."""


class NumericalError(GravVortexError):
    """An iteration failed to converge.

    ``history`` carries whatever diagnostics the failing routine collected
    (residual norms, eigen-residuals, smallest singular values ...).
    """

    def __init__(self, message, history=None, **diagnostics):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.diagnostics = diagnostics
