"""Exception types raised across the package."""


class AMGAError(Exception):
    """Base class for all package errors."""


class DimensionError(AMGAError, ValueError):
    """Operand shapes do not line up."""


class DomainError(AMGAError, ValueError):
    """An argument lies outside the domain of the operation."""


class FormatError(AMGAError, ValueError):
    """A binary file (IDX dataset or checkpoint) is malformed."""


class ConfigError(AMGAError, ValueError):
    """An experiment configuration is invalid."""


class NumericError(AMGAError, ArithmeticError):
    """Training produced a non-finite value."""


class StateError(AMGAError, RuntimeError):
    """An object was used before it was ready."""
