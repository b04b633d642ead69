"""Exception hierarchy for covdim.

Every error raised on user input derives from :class:`CovdimError`, so callers
can catch the whole family with a single clause.
"""


class CovdimError(Exception):
    """Base class for all covdim errors."""


class DimensionError(CovdimError, ValueError):
    """Shapes or matrix dimensions are inconsistent."""


class EmptyInputError(CovdimError, ValueError):
    """A collection that must be nonempty was empty."""


class DomainError(CovdimError, ValueError):
    """An argument lies outside the range where the operation is defined."""


class NotPSDError(CovdimError, ValueError):
    """A matrix expected to be positive semi-definite has a negative eigenvalue."""


class SampleTooSmallError(CovdimError, ValueError):
    """A group has fewer observations than the estimators require."""


class DegenerateVarianceError(CovdimError, ArithmeticError):
    """The estimated null standard deviation vanished."""


class NumericalError(CovdimError, ArithmeticError):
    """A numerical routine failed to converge."""


class ConfigError(CovdimError, ValueError):
    """Invalid command line or configuration file input."""

    def __init__(self, key, message=None):
        self.key = key
        super().__init__(f"{key}: {message}" if message else str(key))


class DataError(CovdimError, ValueError):
    """Malformed input data file."""


class IoError(CovdimError, OSError):
    """Failure while writing a report."""
