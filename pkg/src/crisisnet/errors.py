"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class CrisisNetError(Exception):
    """Base class for all package errors."""


class ConfigError(CrisisNetError, ValueError):
    """Invalid or unknown configuration value."""


class DataError(CrisisNetError, ValueError):
    """Malformed, missing or inconsistent input data."""


class DegenerateInputError(DataError):
    """Input has no variance (or is otherwise uninformative) where variance is required."""


class NumericalError(CrisisNetError, ArithmeticError):
    """A numerical routine could not produce a trustworthy answer."""


class SingularMatrixError(NumericalError):
    """Linear system is rank deficient at the pivot tolerance."""


class StageError(CrisisNetError):
    """A pipeline stage failed; wraps the underlying error and names the stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
