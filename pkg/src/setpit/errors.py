"""Exception types shared across the package."""

from __future__ import annotations


class PitError(Exception):
    """Base class for every error raised by this package."""


class SingularMatrix(PitError):
    pass


class DimensionMismatch(PitError):
    pass


class NotAUnit(PitError):
    def __init__(self, coord: int, message: str | None = None):
        self.coord = coord
        super().__init__(message or f"coordinate {coord} is zero, not a unit")


class EmptyPolynomial(PitError):
    pass


class IndexOutsidePartition(PitError):
    pass


class SchemaError(PitError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class PartitionViolation(PitError):
    pass


class NotNormalized(PitError):
    pass


class SearchExhausted(PitError):
    pass


class PreconditionViolated(PitError):
    pass


class BasisMismatch(PitError):
    pass


class NoCoordinateWitness(PitError):
    pass


class FieldTooSmall(PitError):
    pass


class NoAlphaFound(PitError):
    pass


class NotADualForm(PitError):
    pass


class TooLarge(PitError):
    pass
