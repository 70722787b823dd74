"""Exception hierarchy shared by every rmpflow module."""


class RmpflowError(Exception):
    """Base class for errors raised by rmpflow."""


class DimensionError(RmpflowError, ValueError):
    """Operands with incompatible dimensions."""


class SingularDomainError(RmpflowError, ValueError):
    """A task map or policy was evaluated outside its domain."""


class DegenerateError(RmpflowError, ArithmeticError):
    """An inertia matrix with no usable directions."""


class NonFiniteError(RmpflowError, ValueError):
    """NaN or infinite entries where finite numbers are required."""


class ConfigError(RmpflowError, ValueError):
    """Invalid scenario configuration."""


class NumericalFailure(RmpflowError, RuntimeError):
    """A run could not produce a usable result."""
