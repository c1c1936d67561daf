"""Core model vocabulary shared by every analysis module.

Design goals:

- Immutable value objects, safe to share between threads and processes.
- Complements (x̄ = 1 − x) are derived properties, never stored fields.
- Validation raises `InvalidParameter` naming the offending field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import IntEnum

from wvq.errors import InvalidParameter

# Ratios at or above this are treated as unstable.
STABILITY_MARGIN = 1e-12


class ServerPhase(IntEnum):
    VACATION = 0
    BUSY = 1


@dataclass(frozen=True, order=True)
class SystemState:
    count: int
    phase: ServerPhase

    def __post_init__(self) -> None:
        object.__setattr__(self, "phase", ServerPhase(self.phase))
        if self.count < 0:
            raise InvalidParameter("count", self.count, "must be >= 0")
        if self.count == 0 and self.phase is ServerPhase.BUSY:
            raise InvalidParameter(
                "phase", self.phase, "an empty system is on vacation"
            )

    def label(self) -> str:
        return f"({self.count},{int(self.phase)})"


@dataclass(frozen=True)
class QueueParams:
    p: float
    mu_b: float
    mu_v: float
    theta: float

    @property
    def p_bar(self) -> float:
        return 1.0 - self.p

    @property
    def mu_b_bar(self) -> float:
        return 1.0 - self.mu_b

    @property
    def mu_v_bar(self) -> float:
        return 1.0 - self.mu_v

    @property
    def theta_bar(self) -> float:
        return 1.0 - self.theta

    def service_probability(self, phase: ServerPhase) -> float:
        return self.mu_b if phase is ServerPhase.BUSY else self.mu_v

    def with_values(self, **changes: float) -> QueueParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class EconParams:
    reward: float
    cost: float

    def with_values(self, **changes: float) -> EconParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class Bundle:
    params: QueueParams
    econ: EconParams


def _check_open_unit(name: str, value: float) -> None:
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise InvalidParameter(name, value, "must be a finite number")
    if not 0.0 < value < 1.0:
        raise InvalidParameter(name, value, "must lie in the open interval (0, 1)")


def validate_params(params: QueueParams) -> QueueParams:
    for f in fields(params):
        _check_open_unit(f.name, getattr(params, f.name))
    return params


def validate_econ(econ: EconParams) -> EconParams:
    for f in fields(econ):
        value = getattr(econ, f.name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise InvalidParameter(f.name, value, "must be a finite number")
        if value <= 0:
            raise InvalidParameter(f.name, value, "must be > 0")
    return econ


def validate(params: QueueParams, econ: EconParams) -> Bundle:
    """Return the validated bundle, unchanged, or raise `InvalidParameter`."""

    return Bundle(params=validate_params(params), econ=validate_econ(econ))


def busy_traffic_ratio(p_eff: float, mu: float) -> float:
    """Return p_eff·(1−mu) / ((1−p_eff)·mu).

    Used as α (observable), α̃ (partially observable) and α′ (unobservable).
    """

    if not 0.0 <= p_eff < 1.0:
        raise InvalidParameter("p_eff", p_eff, "must lie in [0, 1)")
    if not 0.0 < mu < 1.0:
        raise InvalidParameter("mu", mu, "must lie in (0, 1)")
    return p_eff * (1.0 - mu) / ((1.0 - p_eff) * mu)


def is_unstable(ratio: float) -> bool:
    return ratio >= 1.0 - STABILITY_MARGIN
