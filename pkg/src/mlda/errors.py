"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (bad covariance, bad layout, ...)."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (factorisation, solver, truncation)."""


class TruncationError(NumericalError):
    """KL truncation requested more modes than the spectrum supports."""


class EvaluationError(RuntimeError):
    """A forward map or log-density evaluation failed at a given parameter.

    The offending parameter vector and level (if known) are attached so the
    failure can be reproduced.
    """

    def __init__(self, message, theta=None, level=None):
        super().__init__(message)
        self.theta = theta
        self.level = level


class InvariantViolation(AssertionError):
    """An instrumented run broke a structural invariant of the sampler."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
