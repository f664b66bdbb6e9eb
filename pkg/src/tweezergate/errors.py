"""Exception hierarchy shared by all modules."""


class TweezerGateError(Exception):
    """Base class for errors raised by this package."""


class DomainError(TweezerGateError, ValueError):
    """An input lies outside the domain of the model."""


class NumericError(TweezerGateError, RuntimeError):
    """A numerical procedure failed to converge or became unstable."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FitError(NumericError):
    """Nonlinear least-squares fit failed or is not identifiable."""


class InfeasibleError(TweezerGateError):
    """A pulse-synthesis problem has no solution under its constraints.

    Attributes
    ----------
    constraint : str
        Name of the binding constraint (``"closure"``, ``"phase"``,
        ``"rabi_budget"``, ...).
    """

    def __init__(self, message, constraint):
        super().__init__(message)
        self.constraint = constraint


class ConsistencyError(TweezerGateError, AssertionError):
    """Closed-form and independently integrated results disagree."""
