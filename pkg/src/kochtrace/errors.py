"""Exception types shared across the package."""


class KochTraceError(Exception):
    """Base class for package errors."""


class ResourceLimitError(KochTraceError):
    """A requested depth or size exceeds a configured cap."""


class UnsupportedInputError(KochTraceError, ValueError):
    """Input outside the finitely computable class (e.g. a non-cylinder endpoint)."""


class ValidationError(KochTraceError, ValueError):
    """Malformed input data; ``offenders`` lists the offending items."""

    def __init__(self, message: str, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class ContractViolation(KochTraceError):
    """A documented precondition between arguments does not hold."""
