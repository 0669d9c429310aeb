"""Exception hierarchy shared by all modules."""


class ChisupError(Exception):
    """Base class for all package errors."""


class ParameterError(ChisupError, ValueError):
    """Invalid or inconsistent parameters."""


class DomainError(ChisupError, ValueError):
    """An argument falls outside the domain where a quantity is defined."""


class NumericalError(ChisupError, ArithmeticError):
    """A numerical procedure failed (factorization, overflow, ...)."""


class ClassificationError(ChisupError):
    """A weight function does not fit the supported minimizer structures."""


class PreconditionError(ChisupError):
    """A mathematical precondition of an operation does not hold."""


class DependencyError(ChisupError):
    """A required constant is neither known in closed form nor supplied."""
