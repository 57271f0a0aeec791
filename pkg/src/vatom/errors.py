"""Exception types shared across the package."""


class VatomError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(VatomError, ValueError):
    """Caller supplied a value outside an operation's domain."""


class ResourceLimitError(VatomError, RuntimeError):
    """A hard resource ceiling (cutoff search, series length) was exceeded."""


class NumericDomainError(VatomError, ArithmeticError):
    """An intermediate quantity left its mathematically allowed range."""


class DegenerateModesError(VatomError, ArithmeticError):
    """Characteristic roots too close for the closed-form weights.

    Callers should evolve the affected sector with the numerical
    integrator instead.
    """


class InsufficientDataError(VatomError, ValueError):
    """A statistic was requested from a series too short to support it."""


class UndefinedObservableError(VatomError, ArithmeticError):
    """Observable undefined for this state (e.g. Mandel Q of the vacuum)."""


class PositivityError(VatomError, ArithmeticError):
    """A density matrix eigenvalue is negative beyond tolerance."""


class StepSizeError(VatomError, RuntimeError):
    """Integrator norm drift exceeded its bound; the step is too coarse."""


class SeriesFormatError(VatomError, ValueError):
    """A persisted series file is malformed."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte/line {offset})"
        super().__init__(message)
