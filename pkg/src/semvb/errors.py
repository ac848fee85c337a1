"""Exception types shared across the package."""


class SemvbError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SemvbError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(SemvbError, ValueError):
    """Array shapes or index sets do not agree."""


class SingularityError(SemvbError, ArithmeticError):
    """A matrix that must be nonsingular / positive definite is not."""


class NumericalError(SemvbError, ArithmeticError):
    """An iterative routine produced a non-finite quantity.

    Carries enough context to locate the failure (iteration, coordinate).
    """

    def __init__(self, message: str, iteration: int | None = None,
                 coordinate: str | None = None):
        super().__init__(message)
        self.iteration = iteration
        self.coordinate = coordinate


class DataFormatError(SemvbError, ValueError):
    """A file does not conform to one of the documented CSV formats."""
