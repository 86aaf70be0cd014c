"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid argument, shape, or configuration value."""


class NumericError(ArithmeticError):
    """A NaN/Inf appeared where finite values are required."""


class ConfigError(ParameterError):
    """Experiment config failed schema validation."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class FormatError(IOError):
    """Base class for problems reading a binary artifact."""


class VersionError(FormatError):
    pass


class TruncationError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


class MagicError(FormatError):
    pass
