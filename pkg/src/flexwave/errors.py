"""Exception hierarchy shared by all flexwave modules."""


class FlexwaveError(Exception):
    """Base class for library errors."""


class DomainError(FlexwaveError, ValueError):
    """An input lies outside the domain of an operation."""


class ConfigError(FlexwaveError, ValueError):
    """A configuration object violates its invariants."""


class DefocussingError(DomainError):
    """The cubic coefficient 1/2 A3 + A4 is non-negative (no homoclinic orbit)."""


class TruncationError(DomainError):
    """The periodic domain is too short for the requested profile."""


class ResolutionError(DomainError):
    """The grid does not resolve a required spectral band."""


class SolverError(FlexwaveError, RuntimeError):
    """A root finder or linear solver failed."""


class ConvergenceError(SolverError):
    """An iterative method hit its iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConstrainedBoundaryError(SolverError):
    """The minimiser kept pressing against the boundary of the admissible set."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ImplementationDefect(FlexwaveError, AssertionError):
    """An internal consistency check failed; this is a bug, not a runtime condition."""
