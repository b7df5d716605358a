"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: config errors -> 1, data errors -> 2,
numeric errors -> 3.
"""


class FirstBreakError(Exception):
    """Base class for all package errors."""


class ConfigError(FirstBreakError, ValueError):
    """Invalid configuration or argument combination."""


class DataError(FirstBreakError, ValueError):
    """Input data violates a domain invariant."""


class FormatError(DataError):
    """A file does not match the expected binary/text layout."""


class TruncatedFileError(FirstBreakError, OSError):
    """A file ended before the payload announced by its header."""


class NumericError(FirstBreakError, ArithmeticError):
    """A non-finite value appeared during computation."""


class InterpolationError(DataError):
    """Too few labeled traces to interpolate a label curve."""


class DegenerateFitError(DataError):
    """Not enough distinct offsets to determine a moveout line."""


class NoConsensusError(FirstBreakError):
    """No RANSAC iteration collected a large enough consensus set."""


class CoverageError(DataError):
    """Patch predictions leave at least one column uncovered."""
