"""Slot-by-slot Monte Carlo simulation of the working-vacation queue.

Event order within a slot, starting from the snapshot (L, J):

1. an arrival occurs and decides to join from the snapshot;
2. the head of the pre-arrival queue completes service (needs L >= 1);
3. on vacation the period ends with probability theta; the phase turns busy
   only if customers remain, otherwise a new vacation starts.

Each slot consumes exactly three uniforms (arrival, service, vacation) from one
`numpy.random.Generator`, whether or not the draw matters. An arrival with
uniform u joins iff u < p·q and balks iff p·q <= u < p.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from wvq.errors import InsufficientSamples, InvalidParameter
from wvq.model import EconParams, QueueParams, ServerPhase, SystemState
from wvq.sim.checks import Estimate, batch_means
from wvq.strategy import Strategy

logger = logging.getLogger(__name__)

DEFAULT_BATCHES = 50
MIN_SLOTS_PER_BATCH = 50
MIN_TAGGED = 100
CHUNK = 1 << 16

_VACATION = int(ServerPhase.VACATION)
_BUSY = int(ServerPhase.BUSY)


@dataclass(frozen=True)
class SimConfig:
    slots: int
    warmup: int = 0
    seed: int = 12345
    tagged_state: SystemState | None = None
    batches: int = DEFAULT_BATCHES
    # Negative control: serve the post-arrival head, so an arrival can leave
    # in its own slot.
    corrupt_event_order: bool = False

    def __post_init__(self) -> None:
        if self.warmup < 0:
            raise InvalidParameter("warmup", self.warmup, "must be >= 0")
        if self.slots <= self.warmup:
            raise InvalidParameter("slots", self.slots, "must exceed warmup")
        if self.batches < 2:
            raise InvalidParameter("batches", self.batches, "must be >= 2")

    @property
    def window(self) -> int:
        return self.slots - self.warmup


@dataclass(frozen=True)
class SimResult:
    empirical_dist: dict[SystemState, float]
    dist_stderr: dict[SystemState, float]
    mean_queue_length: Estimate
    mean_sojourn_overall: Estimate
    mean_sojourn_by_join_phase: dict[ServerPhase, Estimate]
    balk_rate: Estimate
    social_benefit_rate: Estimate | None
    transition_counts: dict[tuple[SystemState, SystemState], int]
    joins: int
    departures: int
    final_count: int
    tagged: Estimate | None = None
    min_sojourn: int | None = field(default=None, compare=False)


def _decode(code: int) -> SystemState:
    return SystemState(code >> 1, ServerPhase(code & 1))


def _validate_window(config: SimConfig) -> None:
    needed = MIN_SLOTS_PER_BATCH * config.batches
    if config.window < needed:
        raise InsufficientSamples(
            f"{config.window} post-warmup slots; at least {needed} are needed"
        )


def simulate(
    params: QueueParams,
    econ: EconParams | None,
    strategy: Strategy,
    config: SimConfig,
) -> SimResult:
    """Run one replication; identical inputs give identical results."""

    _validate_window(config)
    rng = np.random.default_rng(config.seed)
    p, mu_b, mu_v, theta = params.p, params.mu_b, params.mu_v, params.theta
    join_probability = strategy.join_probability
    corrupt = config.corrupt_event_order
    tagged_code = None
    if config.tagged_state is not None:
        tagged_code = config.tagged_state.count * 2 + int(config.tagged_state.phase)

    window = config.window
    before = np.empty(window, dtype=np.int64)
    after = np.empty(window, dtype=np.int64)
    departed_flags = np.zeros(window, dtype=np.int8)
    arrived_flags = np.zeros(window, dtype=np.int8)
    balked_flags = np.zeros(window, dtype=np.int8)

    sojourns: list[int] = []
    sojourn_phase: list[int] = []
    tagged_sojourns: list[int] = []

    queue: deque[tuple[int, int, bool]] = deque()
    count, phase = 0, _VACATION
    joins = departures = 0

    slot = 0
    while slot < config.slots:
        block = rng.random((min(CHUNK, config.slots - slot), 3)).tolist()
        for u_arrival, u_service, u_vacation in block:
            code = count * 2 + phase
            joined = False
            arrived = u_arrival < p
            if arrived:
                joined = u_arrival < p * join_probability(count, phase)
            mu = mu_b if phase == _BUSY else mu_v
            if corrupt:
                served = count + joined >= 1 and u_service < mu
            else:
                served = count >= 1 and u_service < mu

            if joined:
                joins += 1
                queue.append((slot, phase, code == tagged_code))
            new_count = count + joined - served
            departed = None
            if served:
                departures += 1
                departed = queue.popleft()

            if new_count == 0:
                phase = _VACATION
            elif phase == _VACATION and u_vacation < theta:
                phase = _BUSY
            count = new_count

            i = slot - config.warmup
            if i >= 0:
                before[i] = code
                after[i] = count * 2 + phase
                arrived_flags[i] = arrived
                balked_flags[i] = arrived and not joined
                if departed is not None:
                    departed_flags[i] = 1
                    arrival_slot, join_phase, is_tagged = departed
                    if arrival_slot >= config.warmup:
                        sojourn = slot - arrival_slot
                        sojourns.append(sojourn)
                        sojourn_phase.append(join_phase)
                        if is_tagged:
                            tagged_sojourns.append(sojourn)
            slot += 1

    result = _summarize(
        econ=econ,
        config=config,
        before=before,
        after=after,
        departed_flags=departed_flags,
        arrived_flags=arrived_flags,
        balked_flags=balked_flags,
        sojourns=np.array(sojourns, dtype=np.int64),
        sojourn_phase=np.array(sojourn_phase, dtype=np.int8),
        tagged_sojourns=np.array(tagged_sojourns, dtype=np.int64),
        joins=joins,
        departures=departures,
        final_count=count,
    )
    logger.debug(
        "simulated %d slots (warmup %d, seed %d): %d joins, %d departures",
        config.slots,
        config.warmup,
        config.seed,
        joins,
        departures,
    )
    return result


def _summarize(
    *,
    econ: EconParams | None,
    config: SimConfig,
    before: np.ndarray,
    after: np.ndarray,
    departed_flags: np.ndarray,
    arrived_flags: np.ndarray,
    balked_flags: np.ndarray,
    sojourns: np.ndarray,
    sojourn_phase: np.ndarray,
    tagged_sojourns: np.ndarray,
    joins: int,
    departures: int,
    final_count: int,
) -> SimResult:
    batches = config.batches
    window = after.size

    codes, frequencies = np.unique(after, return_counts=True)
    empirical_dist: dict[SystemState, float] = {}
    dist_stderr: dict[SystemState, float] = {}
    for code, n in zip(codes.tolist(), frequencies.tolist(), strict=True):
        state = _decode(code)
        empirical_dist[state] = n / window
        dist_stderr[state] = batch_means(after == code, batches).stderr

    pairs, pair_counts = np.unique(
        np.stack([before, after], axis=1), axis=0, return_counts=True
    )
    transition_counts = {
        (_decode(int(src)), _decode(int(dst))): int(n)
        for (src, dst), n in zip(pairs.tolist(), pair_counts.tolist(), strict=True)
    }

    counts = after >> 1
    by_phase = {
        phase: batch_means(sojourns[sojourn_phase == int(phase)], batches)
        for phase in ServerPhase
    }

    arrivals = arrived_flags.astype(bool)
    balk_rate = batch_means(balked_flags[arrivals], batches)

    social = None
    if econ is not None:
        social = batch_means(
            econ.reward * departed_flags - econ.cost * counts.astype(float), batches
        )

    tagged = None
    if config.tagged_state is not None:
        tagged = batch_means(tagged_sojourns, batches)

    return SimResult(
        empirical_dist=empirical_dist,
        dist_stderr=dist_stderr,
        mean_queue_length=batch_means(counts, batches),
        mean_sojourn_overall=batch_means(sojourns, batches),
        mean_sojourn_by_join_phase=by_phase,
        balk_rate=balk_rate,
        social_benefit_rate=social,
        transition_counts=transition_counts,
        joins=joins,
        departures=departures,
        final_count=final_count,
        tagged=tagged,
        min_sojourn=int(sojourns.min()) if sojourns.size else None,
    )


def tagged_sojourn(
    params: QueueParams, config: SimConfig, strategy: Strategy
) -> Estimate:
    """Mean sojourn of customers who joined while the system was at the tagged state."""

    if config.tagged_state is None:
        raise InvalidParameter("tagged_state", None, "a tagged state is required")
    result = simulate(params, None, strategy, config)
    assert result.tagged is not None
    if result.tagged.count < MIN_TAGGED:
        raise InsufficientSamples(
            f"{result.tagged.count} tagged customers at "
            f"{config.tagged_state.label()}; at least {MIN_TAGGED} are needed"
        )
    return result.tagged


def state_stderr(result: SimResult, state: SystemState, samples: int) -> float:
    """Batch-means SE of a state's frequency, floored at the binomial SE."""

    observed = result.dist_stderr.get(state, 0.0)
    if math.isnan(observed):
        observed = 0.0
    freq = result.empirical_dist.get(state, 0.0)
    return max(observed, math.sqrt(max(freq * (1.0 - freq), 0.0) / samples))
