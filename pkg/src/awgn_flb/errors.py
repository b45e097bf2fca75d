"""Exception types shared across the package.

Every failure mode that callers are expected to handle derives from
BoundError, so library users can catch one base class at the API surface.
Each exception carries a ``details`` dict with the diagnostic payload that
was available at the point of failure (last bracket, iteration count, and
so on) to make numerical failures reproducible.
"""

from __future__ import annotations


class BoundError(Exception):
    """Base class for all errors raised by this package."""

    def __init__(self, message: str, **details):
        self.details = details
        if details:
            extras = ", ".join(f"{k}={v!r}" for k, v in sorted(details.items()))
            message = f"{message} ({extras})"
        super().__init__(message)


class InvalidParams(BoundError):
    """A caller-supplied parameter is outside the supported domain."""


class NoConvergence(BoundError):
    """An iterative scheme exhausted its iteration budget."""


class NoRoot(BoundError):
    """A root finder found no sign change on the searched interval."""


class NoBracket(BoundError):
    """A bracketing phase failed to enclose the target value."""


class ConstraintViolation(BoundError):
    """A constellation or input distribution violates its power constraint."""
