"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class BanditError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidInputError(BanditError, ValueError):
    exit_code = 2


class ConfigError(BanditError, ValueError):
    exit_code = 2


class PolicyError(BanditError, ValueError):
    """A strategy selected an arm id outside ``0..K-1``."""

    exit_code = 2


class NumericalError(BanditError, ArithmeticError):
    exit_code = 3


class ResourceError(BanditError, RuntimeError):
    """A computation would exceed its declared state or memory bound."""

    exit_code = 4
