"""Customer strategies, one per information regime.

- `ThresholdPair`: observable queue, join iff count <= threshold(phase).
- `MixedPair`: phase observable, join with probability q(phase).
- `BlindJoin`: nothing observable, join with probability q.

A threshold of −1 means "never join in this phase".
"""

from __future__ import annotations

from dataclasses import dataclass

from wvq.errors import InvalidParameter
from wvq.model import ServerPhase


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidParameter(name, value, "must lie in [0, 1]")


@dataclass(frozen=True, order=True)
class ThresholdPair:
    n0: int
    n1: int

    def __post_init__(self) -> None:
        for name in ("n0", "n1"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < -1:
                raise InvalidParameter(name, value, "must be an integer >= -1")

    def threshold(self, phase: ServerPhase) -> int:
        return self.n1 if phase == ServerPhase.BUSY else self.n0

    def join_probability(self, count: int, phase: int) -> float:
        limit = self.n1 if phase == ServerPhase.BUSY else self.n0
        return 1.0 if count <= limit else 0.0


@dataclass(frozen=True)
class MixedPair:
    q0: float
    q1: float

    def __post_init__(self) -> None:
        _check_probability("q0", self.q0)
        _check_probability("q1", self.q1)

    def join_probability(self, count: int, phase: int) -> float:
        return self.q1 if phase == ServerPhase.BUSY else self.q0


@dataclass(frozen=True)
class BlindJoin:
    q: float

    def __post_init__(self) -> None:
        _check_probability("q", self.q)

    def join_probability(self, count: int, phase: int) -> float:
        return self.q


Strategy = ThresholdPair | MixedPair | BlindJoin
