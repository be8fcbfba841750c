"""Exception types raised across the package."""


class MpmpError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MpmpError, ValueError):
    """Raised when an argument violates a precondition (shape, symmetry, finiteness)."""


class ValidationError(InvalidInputError):
    """Raised when a configuration object fails validation.

    ``path`` names the offending field, e.g. ``"scenario.noise_variance"``.
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class SingularMatrixError(MpmpError, ArithmeticError):
    """Raised when a matrix that must be positive definite is numerically singular."""


class BracketError(MpmpError, ValueError):
    """Raised when a root-finding bracket does not contain a sign change."""


class DegeneratePowerError(MpmpError, ValueError):
    """Raised when a zero transmit power makes a utility or update undefined."""


class InvalidStateError(MpmpError, ValueError):
    """Raised when a game state cannot be evaluated (e.g. an all-zero receiver)."""
