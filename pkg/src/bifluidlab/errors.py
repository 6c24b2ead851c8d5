"""Exception hierarchy shared by all bifluidlab modules."""


class BifluidError(Exception):
    """Base class for all package errors."""


class ConfigError(BifluidError):
    """Invalid or unparseable run configuration.

    Carries the full list of violations so a user sees every problem at once.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DomainError(BifluidError):
    """Argument outside the mathematical domain of an operation."""


class CertificationError(BifluidError):
    """Structural certification of the equation of state failed.

    The partially filled report is attached so callers can still inspect
    and serialize the measured constants.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SolverError(BifluidError):
    """A linear solve failed or produced a non-finite/diverging result."""


class NonConvergenceError(SolverError):
    """Per-step fixed-point iteration did not reach tolerance.

    Usually signals that the time step is too large for the contraction
    regime. The residual history is attached for post-mortem inspection.
    """

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = list(residuals)


class InvariantViolation(BifluidError):
    """A runtime state invariant (positivity, cone membership) failed."""
