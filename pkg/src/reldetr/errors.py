"""Exception types shared across reldetr modules."""

from __future__ import annotations


class DimensionError(ValueError):
    """Raised when tensor or matrix shapes are incompatible."""


class EmptyInputError(ValueError):
    """Raised when an operation needs at least one element."""


class NumericError(ArithmeticError):
    """Raised when a NaN or infinity shows up where finite values are required."""

    def __init__(self, message: str, *, location: str | None = None) -> None:
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class GradcheckError(NumericError):
    """Raised when a gradient check cannot evaluate the loss."""


class IngestionError(ValueError):
    """Raised when an annotation file cannot be read or is malformed."""

    def __init__(self, message: str, *, path: str, location: str | None = None) -> None:
        self.path = path
        self.location = location
        detail = f"{path}: {message}"
        if location:
            detail = f"{path} [{location}]: {message}"
        super().__init__(detail)
