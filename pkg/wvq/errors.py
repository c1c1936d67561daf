"""Public error types for wvq."""

from __future__ import annotations


class WVQError(Exception):
    """Base class for all wvq errors."""


class InvalidParameter(WVQError, ValueError):
    """Raised when a model, economic or strategy parameter is outside its domain."""

    def __init__(self, field: str, value: object, reason: str | None = None) -> None:
        self.field = field
        self.value = value
        message = f"invalid {field}={value!r}"
        if reason:
            message += f": {reason}"
        super().__init__(message)


class Unstable(WVQError):
    """Raised when a traffic ratio reaches the stability boundary."""

    def __init__(self, name: str, ratio: float) -> None:
        self.name = name
        self.ratio = ratio
        super().__init__(f"unstable: {name}={ratio:.12g} >= 1")


class NumericalInstability(WVQError):
    """Raised when a closed form hits a vanishing denominator."""


class DegenerateRoots(NumericalInstability):
    """Raised when the two characteristic roots (nearly) coincide."""


class DivisionHazard(NumericalInstability):
    """Raised when a decomposition ratio is too small to divide by."""


class UnsupportedThresholdShape(WVQError):
    """Raised when the closed form does not cover the requested thresholds."""


class SingularSystem(WVQError):
    """Raised when a stationary solve has no unique solution."""


class ConvergenceFailure(WVQError):
    """Raised when a root search or scan exceeds its iteration budget."""


class InsufficientSamples(WVQError):
    """Raised when a simulation produced too few samples for an estimate."""
