"""Exception types shared across the package."""
from __future__ import annotations

from .expr import EvaluationError, ExprError, ExprSyntaxError  # noqa: F401


class GeometryError(ValueError):
    """Invalid geometric input (dimensions, metrics, seeds)."""


class SingularMetricError(GeometryError):
    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class NumericError(ArithmeticError):
    """A numerical procedure failed (non-finite values, step underflow)."""

    def __init__(self, message: str, t: float | None = None, y=None):
        super().__init__(message)
        self.t = t
        self.y = y


class ChartExitError(NumericError):
    """A trajectory left its chart domain; ``t`` is the first offending time."""


class DriftError(NumericError):
    """Frame orthonormality drifted beyond the configured bound."""
