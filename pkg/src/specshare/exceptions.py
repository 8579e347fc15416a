"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the domain on which a function is defined."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance.

    The best available estimate is kept on ``estimate`` and the last
    error bound on ``abs_error`` so callers can decide whether to use it.
    """

    def __init__(self, message, estimate, abs_error):
        super().__init__(message)
        self.estimate = estimate
        self.abs_error = abs_error


class SolverError(RuntimeError):
    """Lagrange multiplier search could not bracket the constraint.

    ``achievable`` holds the (min, max) average interference observed
    over the explored multiplier range.
    """

    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable


class ConditioningError(RuntimeError):
    """Linear system too ill-conditioned to solve reliably."""

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


class RankDeficiencyError(RuntimeError):
    """Steering columns are linearly dependent on the angle grid."""

    def __init__(self, message, element):
        super().__init__(message)
        self.element = element


class ConfigError(ValueError):
    """Malformed or inconsistent configuration file."""
