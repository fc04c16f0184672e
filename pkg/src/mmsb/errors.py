"""Exception types raised across the package."""

from __future__ import annotations


class MMSBError(Exception):
    """Base class for all package errors."""


class GridError(MMSBError, ValueError):
    pass


class MeasureError(MMSBError, ValueError):
    pass


class SampleOutOfRange(MMSBError, ValueError):
    pass


class NonPositiveDuration(MMSBError, ValueError):
    pass


class TauOutOfRange(MMSBError, ValueError):
    pass


class TimeOutOfRange(MMSBError, ValueError):
    pass


class GridTooLarge(MMSBError, MemoryError):
    pass


class SupportMismatch(MMSBError, ValueError):
    pass


class StarvedConstraint(MMSBError, RuntimeError):
    """A marginal constraint asks for mass where the current coupling has none."""


class NotConverged(MMSBError, RuntimeError):
    pass


class DegenerateKnots(MMSBError, ValueError):
    pass


class InstanceTooLarge(MMSBError, ValueError):
    pass


class OracleNotConverged(MMSBError, RuntimeError):
    pass


class ParseError(MMSBError, ValueError):
    def __init__(self, message: str, lineno: int | None = None, path: str | None = None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class ValidationError(MMSBError, ValueError):
    """Config or problem data violates an invariant; ``field`` names it."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
