"""
Exceptions raised by the scheduling library.

Broken bandwidth maps are reported as ``Violation`` records by
``core.validate_physical_bmap``; the classes here are for inputs that
cannot be scheduled or calls that are used wrongly.
"""


class SchedulingError(Exception):
    """Base class for every error raised by ponhv.dba."""


class InstanceError(SchedulingError):
    """An allocation can never be placed, e.g. a burst larger than the frame."""


class UsageError(SchedulingError):
    """A scheduler was called with inconsistent arguments."""


class GenerationError(SchedulingError):
    """The traffic generator cannot reach the requested load."""

    def __init__(self, message, constraint):
        super().__init__(message)
        self.constraint = constraint


class InstanceTooLarge(SchedulingError):
    """An exact instance exceeds the oracle's configured limits."""

    def __init__(self, size, limit):
        super().__init__(
            "Exact instance has %d allocations, the oracle accepts at most %d."
            % (size, limit)
        )
        self.size = size
        self.limit = limit


class EmptyRunError(SchedulingError):
    """Metrics were requested for a run that produced no frame reports."""
