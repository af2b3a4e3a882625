from typing import Optional, Sequence


class HessianLabError(Exception):
    """Base class for every error raised by the lab."""


class DimensionMismatch(HessianLabError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"dimension mismatch: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class NotPositiveDefinite(HessianLabError):
    """The background form failed a factorization pivot."""


class IndexOutOfRange(HessianLabError):
    pass


class UnsupportedBackground(HessianLabError):
    pass


class PointError(HessianLabError):
    """An error tied to a location in C^n."""

    def __init__(self, message: str, point: Optional[Sequence[complex]] = None):
        if point is not None:
            message = f"{message} at z={format_point(point)}"
        super().__init__(message)
        self.point = point


class OnConeBoundary(PointError):
    """The Hessian argument is too close to the cone boundary to linearize."""


class SingularPoint(PointError):
    pass


class TooCloseToSingularity(PointError):
    pass


class OffCone(PointError):
    pass


class NegativeDensity(HessianLabError):
    pass


class ZeroDensity(HessianLabError):
    pass


class BadRadius(HessianLabError):
    pass


class ZeroRightHandSide(HessianLabError):
    pass


class UsageError(HessianLabError):
    pass


class HypothesisViolated(PointError):
    """A precondition of an estimate check does not hold.

    This is never a counterexample to the estimate itself.
    """

    def __init__(self, inequality: str, point: Optional[Sequence[complex]] = None, value: Optional[float] = None):
        message = f"hypothesis violated: {inequality}"
        if value is not None:
            message = f"{message} (value {value!r})"
        super().__init__(message, point)
        self.inequality = inequality
        self.value = value


def format_point(point: Sequence[complex]) -> str:
    return "(" + ", ".join(f"{complex(c).real:.6g}{complex(c).imag:+.6g}j" for c in point) + ")"
