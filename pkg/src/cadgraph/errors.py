"""Exception types shared across the package."""


class CadgraphError(Exception):
    """Base class for all errors raised by this package."""


class ScoreParseError(CadgraphError):
    """Malformed input document. Carries the reported position when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class UnsupportedFormatError(CadgraphError):
    """Input is a recognized format that this package does not accept."""


class ValidationError(CadgraphError):
    """Input data violates a documented contract."""


class NumericError(CadgraphError):
    """A numeric computation produced non-finite values."""
