"""Exception hierarchy shared by every module of the package."""


class ChemostatError(Exception):
    """Base class for all errors raised by ``chemostat_delay``."""


class DomainError(ChemostatError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigurationError(ChemostatError, ValueError):
    """Inconsistent numerical setup (step does not divide the delay, periods clash, ...)."""


class IntegrationError(ChemostatError, ArithmeticError):
    """The integrator produced a non-finite or strongly negative state.

    Attributes
    ----------
    time : float
        Grid time at which the failure was detected.
    """

    def __init__(self, message, time=None):
        super().__init__(message if time is None else f"{message} (t={time:.10g})")
        self.time = time


class ConsistencyError(ChemostatError, ArithmeticError):
    """A self-consistency identity failed; usually the grid is too coarse."""


class ConvergenceError(ChemostatError, ArithmeticError):
    """An iterative procedure did not converge within its budget."""


class RegimeError(ChemostatError, ValueError):
    """A criterion was called on inputs outside its regime (e.g. non-constant data)."""


class PreconditionError(ChemostatError, ValueError):
    """A documented precondition was violated (e.g. null initial condition)."""


class UndefinedPsiError(DomainError):
    """The trajectory weight ``psi`` needs ``x > 0`` on the whole evaluation range."""


class DegenerateWashoutError(DomainError):
    """The washout rate integrates to zero over a period."""


class InsufficientHorizonError(DomainError):
    """The horizon is too short for the requested windows or classification."""
