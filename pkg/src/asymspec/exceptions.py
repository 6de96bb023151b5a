"""Exception hierarchy shared by every module in the package."""


class AsymSpecError(Exception):
    """Base class for all package errors."""


class InputError(AsymSpecError, ValueError):
    """Malformed or inconsistent input data (shapes, indices, masks)."""


class ParameterError(AsymSpecError, ValueError):
    """A hyperparameter makes a formula undefined."""


class DomainError(AsymSpecError, ValueError):
    """A quantity is outside the domain where it is defined."""


class NumericError(AsymSpecError, ArithmeticError):
    """Non-finite values appeared during a computation."""


class LoadError(InputError):
    """A dataset bundle could not be read."""


class ConfigError(AsymSpecError, ValueError):
    """An experiment configuration is invalid."""
