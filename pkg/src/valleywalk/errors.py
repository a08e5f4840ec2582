"""Exception types shared across the package.

The CLI maps these onto exit codes: argument-like errors exit with 2,
budget and precondition failures with 3.
"""


class ValleywalkError(Exception):
    """Base class for all package errors."""


class ArgumentError(ValleywalkError, ValueError):
    """An argument lies outside the admissible range of an operation."""


class InvalidLawError(ArgumentError):
    """A site law has atoms outside (0, 1) or malformed weights."""


class RangeError(ValleywalkError, IndexError):
    """A site index falls outside the window an object covers."""


class BudgetExceededError(ValleywalkError):
    """A site or step budget would be exceeded."""


class WindowExhaustedError(ValleywalkError):
    """A scan ran off the end of the window before its answer was determined."""


class PreconditionError(ValleywalkError):
    """An input does not satisfy a structural precondition (e.g. valley membership)."""


class InsufficientDataError(ValleywalkError):
    """Too few samples were recorded to form the requested statistic."""


class IncompatibleManifestError(PreconditionError):
    """A manifest was written by an unsupported schema version."""
