"""
Exception types for the DualOpt engine.

Every error raised by the core derives from DualOptError, which itself is a
ValueError, so callers that only care about "bad input" can catch ValueError.
"""


class DualOptError(ValueError):
    """Base class for all DualOpt errors."""


class FrameError(DualOptError):
    """Invalid POVM, non informationally complete frame, or non-dual input."""


class DualityError(DualOptError):
    """A dual set violates the duality identity beyond tolerance."""


class StateError(DualOptError):
    """Statevector size, cap or normalization problem."""


class ObservableError(DualOptError):
    """Malformed Pauli word, coefficient or observable/system size mismatch."""


class DatasetError(DualOptError):
    """
    Empty or too small shot dataset, or malformed shot file.

    Attributes:
        line (int | None): 1-based line number in the shot file, when known
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OptimizationError(DualOptError):
    """Non-finite objective or gradient during dual optimization."""


class ConfigError(DualOptError):
    """Invalid configuration value or unknown run-config key."""
