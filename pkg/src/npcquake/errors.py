"""Exception types shared across the package.

The CLI maps each class onto an exit code, so library code should raise the
most specific one that applies.
"""


class NPCError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DataError(NPCError, ValueError):
    """Malformed, missing or out-of-range input data."""

    exit_code = 3


class DegenerateError(NPCError, ArithmeticError):
    """A quantity is undefined for the given input (zero variance, a single
    category, collinear points, ...)."""

    exit_code = 4
