"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SuperstateError(Exception):
    exit_code = 1


class ValidationError(SuperstateError, ValueError):
    exit_code = 3


class ParameterError(SuperstateError, ValueError):
    exit_code = 4


class CapacityError(SuperstateError):
    exit_code = 5


class FilteringError(SuperstateError, ArithmeticError):
    """Zero normalizer in a belief update."""

    exit_code = 6


class UnreachableWindowError(FilteringError):
    exit_code = 7

    def __init__(self, window, message: str | None = None):
        self.window = window
        super().__init__(message or f"window {window!r} has zero probability under the prior")


class NumericError(SuperstateError, ArithmeticError):
    exit_code = 8
