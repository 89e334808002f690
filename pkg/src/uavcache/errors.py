"""Exception types raised across the package."""


class UavCacheError(Exception):
    pass


class ConfigError(UavCacheError, ValueError):
    pass


class DomainError(UavCacheError, ValueError):
    pass


class StateError(UavCacheError):
    pass


class LoadError(UavCacheError):
    pass


class EvaluationError(UavCacheError, ArithmeticError):
    pass


class CapacityError(UavCacheError):
    pass


class SwapLimitError(UavCacheError):
    """Swap matching ran past its swap budget. Carries the log for diagnosis."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class UsageError(UavCacheError, ValueError):
    """Bad command-line or harness input."""
