"""Exception hierarchy.

Every numerical failure derives from :class:`NumericalFailure`, so callers
(and the CLI, which maps it to exit status 3) can catch one type. Each
exception records the name of the operation that raised it.
"""

from __future__ import annotations


class MourreLabError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, operation: str | None = None):
        super().__init__(message)
        self.operation = operation

    def __str__(self) -> str:
        base = super().__str__()
        if self.operation:
            return f"{self.operation}: {base}"
        return base


class ConfigError(MourreLabError):
    """Malformed or out-of-range experiment configuration."""


class NumericalFailure(MourreLabError):
    """A numerical precondition or computation failed."""


class NotHermitian(NumericalFailure):
    pass


class NotUnitary(NumericalFailure):
    pass


class ConvergenceFailure(NumericalFailure):
    pass


class WindowTooSmall(NumericalFailure):
    pass


class WindowMismatch(NumericalFailure):
    pass


class UnboundedGrowth(NumericalFailure):
    pass


class NonDecayingTail(NumericalFailure):
    pass


class SingularResolvent(NumericalFailure):
    pass


class OutOfDisk(NumericalFailure):
    pass


class BasisTooLarge(NumericalFailure):
    pass


class SeriesDivergence(NumericalFailure):
    pass


class InsufficientPoints(NumericalFailure):
    pass


class FloorDominates(NumericalFailure):
    pass


class NearSingular(NumericalFailure):
    pass


class NotInvertible(NumericalFailure):
    pass


class DegenerateMargin(NumericalFailure):
    pass


class WindowClipsOptimum(NumericalFailure):
    pass
