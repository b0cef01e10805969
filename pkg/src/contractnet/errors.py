"""Exception hierarchy shared across the package."""


class ContractNetError(Exception):
    """Base class for all package errors."""


class DimensionError(ContractNetError, ValueError):
    pass


class DomainError(ContractNetError, ValueError):
    pass


class InfeasibleRateError(ContractNetError, ValueError):
    """Raised when the delay-free rate does not dominate the delayed gain."""


class HistoryUnderflowError(ContractNetError, LookupError):
    pass


class ModelError(ContractNetError, ValueError):
    pass


class TransformError(ContractNetError, ValueError):
    pass


class EnvelopeError(ContractNetError, ValueError):
    pass


class ConfigError(ContractNetError, ValueError):
    pass


class ScheduleError(ContractNetError, ValueError):
    pass


class SpecParseError(ContractNetError, ValueError):
    """Malformed JSON input; message carries file/line context when available."""
