"""Exception types shared across the package."""


class BernoulliDecompError(Exception):
    """Base class for all library errors."""


class DomainError(BernoulliDecompError, ValueError):
    """An argument lies outside the domain of the operation."""


class ExactLimitExceeded(BernoulliDecompError):
    """Exact enumeration would exceed the configured coordinate limit."""

    def __init__(self, effective: float, limit: int):
        super().__init__(
            f"exact enumeration needs {effective:.2f} effective sign coordinates "
            f"(limit {limit}); use Monte Carlo"
        )
        self.effective = effective
        self.limit = limit


class PreconditionViolated(BernoulliDecompError):
    """A documented precondition does not hold for the given inputs."""

    def __init__(self, message: str, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class CapacityExceeded(BernoulliDecompError):
    """Requested depth exceeds the configured level cap."""


class DegenerateInput(BernoulliDecompError):
    """The input set has b(T) = 0 (all points coincide)."""


class ConfigError(BernoulliDecompError, ValueError):
    """A configuration value is missing or malformed."""


class ParseError(BernoulliDecompError, ValueError):
    """An input file could not be parsed."""
