"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes, so every error raised by a
pipeline stage should derive from one of the three top-level families.
"""


class PolicyCiteError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(PolicyCiteError):
    """Invalid configuration: bad values, unknown keys, unusable parameters."""

    exit_code = 2


class DataError(PolicyCiteError):
    """Problems with input data or with operations on datasets."""

    exit_code = 3


class SchemaError(DataError):
    """Input file header/keys do not match the expected schema."""


class ParseError(DataError):
    """A row could not be parsed in the declared format."""


class ValidationError(DataError):
    """A parsed value violates a data-model invariant (e.g. negative count)."""


class BalanceError(DataError):
    """Class balancing is impossible (a class is absent)."""


class SplitError(DataError):
    """A train/test split cannot satisfy its size/stratification contract."""


class FoldError(DataError):
    """Cross-validation folds cannot satisfy their contract."""


class FitError(PolicyCiteError):
    """Model training failed (e.g. single-class training data)."""

    exit_code = 4


class ImportanceError(FitError):
    """Feature importances are undefined (forest contains no splits)."""


class UnsupportedModelError(PolicyCiteError):
    """The requested operation is not defined for this model type."""

    exit_code = 2
