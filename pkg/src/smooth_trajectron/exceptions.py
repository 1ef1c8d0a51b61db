"""Exception hierarchy shared across the package."""


class SmoothTrajectronError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SmoothTrajectronError, ValueError):
    """An invalid configuration value.

    ``field`` names the offending configuration entry when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ValidationError(SmoothTrajectronError, ValueError):
    """Input data violates a structural invariant."""


class ParseError(ValidationError):
    """A data file could not be parsed. ``line`` is 1-based."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericError(SmoothTrajectronError, ArithmeticError):
    """Non-finite values where finite ones are required."""
