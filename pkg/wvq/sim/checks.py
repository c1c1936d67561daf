"""Statistical helpers for simulation output.

- `Estimate` and `batch_means`: point estimates with non-overlapping batch-means
  standard errors.
- `transition_frequency_check`: compares observed one-slot transition
  frequencies with a transition matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from wvq.engine.chain import ChainMatrix
from wvq.model import SystemState

MIN_VISITS = 1000
TRANSITION_BAND = 5.0


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    count: int

    def z_score(self, target: float) -> float:
        if self.stderr == 0.0 or math.isnan(self.stderr):
            return 0.0 if self.mean == target else math.inf
        return (self.mean - target) / self.stderr

    def within(self, target: float, bands: float) -> bool:
        return abs(self.z_score(target)) <= bands


def batch_means(samples: np.ndarray, batches: int) -> Estimate:
    """Mean of `samples` with a standard error from contiguous batch means."""

    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n == 0:
        return Estimate(mean=math.nan, stderr=math.nan, count=0)
    mean = float(samples.mean())
    k = min(batches, n)
    if k < 2:
        return Estimate(mean=mean, stderr=math.nan, count=n)
    means = np.array([chunk.mean() for chunk in np.array_split(samples, k)])
    return Estimate(mean=mean, stderr=float(means.std(ddof=1) / math.sqrt(k)), count=n)


@dataclass(frozen=True)
class TransitionViolation:
    src: SystemState
    dst: SystemState
    observed: float
    expected: float
    visits: int

    def describe(self) -> str:
        return (
            f"{self.src.label()} -> {self.dst.label()}: observed {self.observed:.6f}, "
            f"expected {self.expected:.6f} over {self.visits} visits"
        )


@dataclass(frozen=True)
class FrequencyReport:
    checked_states: int
    checked_cells: int
    violations: list[TransitionViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def transition_frequency_check(
    transition_counts: dict[tuple[SystemState, SystemState], int],
    chain: ChainMatrix,
    *,
    min_visits: int = MIN_VISITS,
    bands: float = TRANSITION_BAND,
) -> FrequencyReport:
    """Flag every cell whose observed frequency is more than `bands` SE off.

    Only source states with at least `min_visits` visits are checked. A source
    state missing from the chain, or an observed move the chain gives
    probability 0, is always a violation.
    """

    by_source: dict[SystemState, dict[SystemState, int]] = {}
    for (src, dst), n in transition_counts.items():
        by_source.setdefault(src, {})[dst] = n

    violations: list[TransitionViolation] = []
    checked_states = 0
    checked_cells = 0
    for src in sorted(by_source):
        observed = by_source[src]
        visits = sum(observed.values())
        if visits < min_visits:
            continue
        checked_states += 1
        if chain.index_of(src) is None:
            for dst, n in sorted(observed.items()):
                violations.append(
                    TransitionViolation(src, dst, n / visits, math.nan, visits)
                )
            continue
        expected_row = chain.row(src)
        for dst in sorted(set(expected_row) | set(observed)):
            checked_cells += 1
            freq = observed.get(dst, 0) / visits
            prob = expected_row.get(dst, 0.0)
            if prob <= 0.0:
                bad = freq > 0.0
            elif prob >= 1.0:
                bad = freq < 1.0
            else:
                stderr = math.sqrt(prob * (1.0 - prob) / visits)
                bad = abs(freq - prob) > bands * stderr
            if bad:
                violations.append(TransitionViolation(src, dst, freq, prob, visits))
    return FrequencyReport(
        checked_states=checked_states,
        checked_cells=checked_cells,
        violations=violations,
    )
