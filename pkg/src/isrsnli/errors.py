"""Exception hierarchy shared by every evaluation tier."""


class IsrsNliError(Exception):
    """Base class for all package errors."""


class DomainError(IsrsNliError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(DomainError):
    """The requested evaluation point is a singularity of the formula."""


class ValidityError(DomainError):
    """Inputs fall outside the validity region of a model approximation."""


class ConfigurationError(IsrsNliError, ValueError):
    """A configuration document or simulation plan is inconsistent."""


class ConvergenceError(IsrsNliError, RuntimeError):
    """A numerical routine failed to reach the requested tolerance.

    ``estimate`` and ``residual`` carry the last achieved value and its error
    estimate so callers can decide whether to accept a looser result.
    """

    def __init__(self, message, estimate=None, residual=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual


class NumericalBlowupError(IsrsNliError, FloatingPointError):
    """Non-finite values appeared during field propagation."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index
