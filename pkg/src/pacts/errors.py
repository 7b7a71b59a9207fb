"""Shared exception types."""


class ValidationError(ValueError):
    """Input violates a documented precondition (shape, range, binarity)."""


class FormatError(ValueError):
    """On-disk artifact is missing, truncated, or inconsistent with its metadata."""


class NumericsError(ArithmeticError):
    """NaN/Inf encountered where finite values are required."""


class ConfigError(ValueError):
    """Run or model configuration is invalid; message names the offending field."""


class PddlParseError(ValueError):
    """PDDL text outside the supported subset or malformed.

    Carries 1-based line/column of the offending token when known.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class UnsolvableError(RuntimeError):
    """No plan exists from the given state to the goal."""


class ResourceLimitError(RuntimeError):
    """A configured cap (e.g. grounding size) was exceeded."""
