class CustomException(Exception):
    def __init__(self, message):
        self.message = message
        super().__init__(self.message)


class ValidationError(CustomException):
    """Invalid input: shapes, Hermiticity, parameters, probability vectors."""


class StateValidationError(ValidationError):
    """A matrix is not an admissible (positive definite, trace one) state."""


class ConfigValidationError(ValidationError):
    """Configuration file could not be loaded or failed validation."""


class DomainError(CustomException):
    """A scalar function or kernel was evaluated outside its domain."""


class NumericalError(CustomException):
    """Quadrature, eigensolver or linear solve did not reach the requested accuracy."""


class UnsupportedError(CustomException):
    """Operation requested outside its supported parameter region."""


# CLI exit codes
EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_UNEXPECTED = 4


def exit_code_for(error):
    """Map a CustomException to the process exit code used by app.py."""
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_VALIDATION
