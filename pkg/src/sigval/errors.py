"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: :class:`InvalidArgumentError` is a usage
error (1), :class:`DataError` a data error (2) and :class:`NumericalError` (and
its subclass :class:`EstimationError`) a numerical error (3).
"""


class SigvalError(Exception):
    """Base class for all errors raised by sigval."""


class InvalidArgumentError(SigvalError, ValueError):
    """An argument violates a documented precondition."""


class DataError(SigvalError):
    """Input data could not be parsed or is inconsistent."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(SigvalError, ArithmeticError):
    """A numerical routine failed (factorization, eigensolver, degenerate moments)."""


class EstimationError(NumericalError):
    """A calibration routine could not produce a valid estimate."""


class DomainError(InvalidArgumentError):
    """An input value lies outside the domain of a transform (e.g. log of a non-positive)."""
