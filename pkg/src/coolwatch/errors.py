"""Exception types shared across the package."""


class CoolwatchError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(CoolwatchError):
    """An array arrived with the wrong rank or an incompatible axis length."""

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class DataFormatError(CoolwatchError):
    """Input data violates the expected file or schema contract."""


class InsufficientDataError(CoolwatchError):
    """Not enough rows or windows to perform the requested operation."""


class ConfigError(CoolwatchError):
    """A configuration document is malformed or internally inconsistent."""


class NumericError(CoolwatchError):
    """A numeric invariant broke (NaN/Inf gradients, diverging loss, ...)."""


class ConsistencyError(CoolwatchError):
    """Internal bookkeeping disagrees with itself; indicates a bug upstream."""
