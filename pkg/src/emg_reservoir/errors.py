"""Exception hierarchy shared by the pipeline modules.

The CLI maps each family onto a distinct exit code.
"""


class ArtifactError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(ArtifactError, ValueError):
    exit_code = 2


class DataError(ArtifactError):
    exit_code = 3


class LoadError(DataError):
    """A trial file or index could not be read."""


class SchemaError(DataError):
    """Data parsed but does not match the expected layout."""


class FoldError(DataError):
    """Session folds cannot be formed or a fold is empty."""


class WiringError(ArtifactError, ValueError):
    """Event streams and wiring disagree on channel counts."""

    exit_code = 2


class NumericError(ArtifactError, ArithmeticError):
    exit_code = 4


class TrainingError(NumericError, ValueError):
    """A classifier cannot be fit on the given data."""


class EmptyFeatureError(NumericError, ValueError):
    """A stream is shorter than a single rate window."""


class UndefinedMeasureError(NumericError, ValueError):
    """A statistic has no defined value for the given input."""
