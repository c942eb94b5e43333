"""Exception hierarchy shared by all modules."""


class AkpError(Exception):
    """Base class for every error raised by akplab."""


class ShapeError(AkpError, ValueError):
    pass


class ParameterError(AkpError, ValueError):
    pass


class NumericError(AkpError, ArithmeticError):
    pass


class LabelError(AkpError, ValueError):
    pass


class UsageError(AkpError, RuntimeError):
    pass


class PolicyError(AkpError, ValueError):
    pass


class DomainError(AkpError, ValueError):
    pass


class UndefinedCorrelationError(AkpError, ValueError):
    pass


class ComparabilityError(AkpError, ValueError):
    pass


class InsufficientDataError(AkpError, ValueError):
    pass


class StratificationError(AkpError, ValueError):
    pass


class ImageFormatError(AkpError, ValueError):
    pass


class ConfigError(AkpError, ValueError):
    """Invalid or inconsistent experiment configuration (CLI exit status 1)."""
