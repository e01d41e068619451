"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the set on which an operation is defined."""


class CapacityError(RuntimeError):
    """Refusal to build an object larger than a configured cap."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class InconsistentStateError(RuntimeError):
    """A sampler met a configuration its update rules cannot produce."""


class UnsupportedConfigurationError(ValueError):
    """Point set outside the reach of the determinantal formulas."""


class SingularConfigurationError(ArithmeticError):
    """A vanishing coefficient or a pole sits where a finite value is needed."""


class OutsideBulkError(DomainError):
    """Macroscopic point lies in a frozen region (no bulk limit)."""
