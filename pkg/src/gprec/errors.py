"""Exception hierarchy shared across the package."""


class GPRecError(Exception):
    """Base class for all package errors."""


class ConfigError(GPRecError, ValueError):
    def __init__(self, message, problems=None):
        super().__init__(message)
        # list of (key_path, message) pairs
        self.problems = list(problems or [])


class SchemaError(GPRecError, ValueError):
    pass


class CardinalityError(GPRecError, ValueError):
    pass


class LabelError(GPRecError, ValueError):
    pass


class EmbeddingLookupError(GPRecError, IndexError):
    pass


class DimensionError(GPRecError, ValueError):
    pass


class NumericError(GPRecError, FloatingPointError):
    def __init__(self, message, component=None, step=None):
        super().__init__(message)
        self.component = component
        self.step = step


class DomainError(GPRecError, ValueError):
    pass


class UndefinedMetricError(GPRecError, ValueError):
    pass


class StatisticsError(GPRecError, ValueError):
    pass


class CheckpointError(GPRecError, IOError):
    pass


class DatasetNotFoundError(GPRecError, FileNotFoundError):
    pass
