"""Exception types shared across the package.

Every contract violation raises a named subclass of DecoError so callers (and
the service layer) can map failures to stable condition names instead of
string-matching messages.
"""


class DecoError(Exception):
    """Base class for all package-specific failures."""


class DimensionMismatch(DecoError):
    pass


class ConstantColumn(DecoError):
    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"column {column} has zero variance")


class NotSymmetric(DecoError):
    pass


class NotPositiveSemidefinite(DecoError):
    pass


class NoConvergence(DecoError):
    pass


class SingularWithoutRidge(DecoError):
    pass


class DegenerateSignal(DecoError):
    pass


class DegenerateResponse(DecoError):
    pass


class MaxIterations(DecoError):
    pass


class EmptyPath(DecoError):
    pass


class InvalidM(DecoError):
    pass


class InvalidSpec(DecoError):
    pass


class CoverageGap(DecoError):
    pass


class ConfigError(DecoError):
    """Bad user-facing configuration (CLI exit code 1)."""
