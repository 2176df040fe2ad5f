"""Exception hierarchy.

Every error raised on purpose by the package derives from ``PermshiftError``.
The CLI maps the three top-level families onto exit codes.
"""


class PermshiftError(Exception):
    """Base class for all package errors."""


class ConfigError(PermshiftError):
    """Bad experiment configuration or CLI arguments."""


class DataError(PermshiftError):
    """Input data violates a dataset contract."""


class InvariantViolation(PermshiftError):
    """An internal consistency check failed."""


class MissingLabelColumn(DataError):
    pass


class DuplicateFeatureName(DataError):
    pass


class EmptyDataset(DataError):
    pass


class NonBinaryValue(DataError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: expected 0 or 1, got {value!r}")
        self.row = row
        self.column = column
        self.value = value


class InsufficientClassRows(DataError):
    pass


class EmptyIntersection(DataError):
    pass


class SingleClassDataset(DataError):
    pass


class SingleClassLabels(DataError):
    pass


class InvalidSpec(ConfigError):
    pass


class LengthMismatch(ValueError, PermshiftError):
    pass


class TooFewSamples(ValueError, PermshiftError):
    pass


class WidthMismatch(ValueError, PermshiftError):
    pass


class TooManyFeaturesForExact(ValueError, PermshiftError):
    pass


class ArchetypeUnavailable(LookupError, PermshiftError):
    pass
