"""Exception types shared across modules.

``DataError`` is the umbrella for anything caused by bad input data or
files; the CLI maps it to exit code 2.  Everything else that escapes is
an internal error (exit code 3).
"""


class ConvemoError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ConvemoError):
    """Malformed, inconsistent or missing input data."""


class EmptyDataset(DataError):
    """An operation that needs at least one example got none."""


class DimensionMismatch(DataError):
    """A vector or score block has the wrong length for its consumer."""

    def __init__(self, expected: int, got: int, what: str = "vector"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} has dimension {got}, expected {expected}")
