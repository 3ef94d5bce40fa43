"""Exception hierarchy shared by all modules."""


class YamabeLabError(Exception):
    """Base class for all package errors."""


class ConstructionError(YamabeLabError, ValueError):
    """A background descriptor is degenerate or inconsistent."""


class DomainError(YamabeLabError, ValueError):
    """A conformal factor is not strictly positive."""


class DescriptorError(YamabeLabError, ValueError):
    """An operator descriptor does not match the background."""


class SolverError(YamabeLabError, RuntimeError):
    """An iterative solver failed to reach its tolerance.

    ``best_residual`` carries the smallest residual seen.
    """

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class PositivityError(YamabeLabError, ArithmeticError):
    """A time step produced a nonpositive conformal factor."""


class StiffnessError(SolverError):
    """Step-size halving underflowed; ``trace`` holds the partial run."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class PreconditionError(YamabeLabError, ValueError):
    """Inputs violate a hypothesis the routine requires."""


class ConfigError(YamabeLabError, ValueError):
    """A run configuration is invalid."""
