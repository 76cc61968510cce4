"""Exception types shared across the package."""


class CollaMambaError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CollaMambaError, ValueError):
    """Raised when inputs violate a documented precondition."""


class UnsupportedModeError(CollaMambaError, ValueError):
    """Raised when an operation is asked to run in a mode it does not support
    (e.g. convolutional scan with per-step parameters)."""


class NumericOverflowError(CollaMambaError, ArithmeticError):
    """Raised when a forward pass produces non-finite activations."""


class InsufficientHistoryError(CollaMambaError, RuntimeError):
    """Raised when a trajectory buffer holds fewer frames than required."""


class FormatError(CollaMambaError, ValueError):
    """Raised when a binary container fails validation (bad magic, truncation,
    version mismatch)."""
