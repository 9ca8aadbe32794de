"""Exception hierarchy shared across the package."""


class FilamentError(Exception):
    """Base class for all package errors."""

    exit_status = 1


class InvalidInputError(FilamentError, ValueError):
    pass


class DegenerateDataError(FilamentError, ValueError):
    pass


class OutOfRangeError(InvalidInputError):
    pass


class NumericalFailure(FilamentError, ArithmeticError):
    exit_status = 2


class SingularHessianError(NumericalFailure):
    pass


class EigengapDegenerateError(NumericalFailure):
    pass


class UncertaintyUnavailableError(FilamentError):
    exit_status = 2
