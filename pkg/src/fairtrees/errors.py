"""Exception types raised across the library."""


class FairtreesError(Exception):
    """Base class for all library errors."""


class SchemaError(FairtreesError):
    """Schema file is malformed or does not match the CSV."""


class DataError(FairtreesError):
    """Dataset content violates a preprocessing requirement."""


class DatasetTooSmallError(DataError):
    """Too few rows to form learn/validation/test partitions."""


class UndefinedNodeError(FairtreesError):
    """Impurity requested for a node with no class mass."""


class TrainingError(FairtreesError):
    """Tree training received an unusable learn set."""


class PredictionError(FairtreesError):
    """Feature matrix does not match the trained tree."""


class UndefinedRateError(FairtreesError):
    """A confusion rate has an empty denominator (missing class or group)."""


class ConfigError(FairtreesError):
    """Experiment configuration is inconsistent or incomplete."""
