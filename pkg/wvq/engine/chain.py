"""Finite Markov chains over (count, phase) states.

Design goals:

- A single slot rule generates every transition matrix. The three information
  regimes differ only in the join probability an arrival applies to the
  snapshot it observes.
- Direct dense solves. State spaces stay in the hundreds to low thousands.
- Exact tagged-customer sojourn means, used as the reference the simulator is
  checked against.

Slot rule, for a snapshot (L, J) and join probability q:

1. an arrival occurs with probability p and joins with probability q;
2. the head of the pre-arrival queue (L >= 1) completes with probability
   mu_v (J=0) or mu_b (J=1); the arrival is never served in its arrival slot;
3. on vacation the period ends with probability theta, and the phase becomes
   busy only if the post-slot count is >= 1;
4. a busy period that empties the system starts a new vacation.
"""

from __future__ import annotations

import logging
from collections import defaultdict, deque
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from wvq.errors import InvalidParameter, SingularSystem
from wvq.model import QueueParams, ServerPhase, SystemState

logger = logging.getLogger(__name__)

JoinRule = Callable[[int, int], float]

# Upper bound on the BFS when the join rule does not close the state space.
MAX_STATES = 20_000

_VACATION = int(ServerPhase.VACATION)
_BUSY = int(ServerPhase.BUSY)


@dataclass(frozen=True, eq=False)
class ChainMatrix:
    states: tuple[SystemState, ...]
    matrix: np.ndarray
    _index: dict[SystemState, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_index", {state: i for i, state in enumerate(self.states)}
        )

    def __len__(self) -> int:
        return len(self.states)

    def index_of(self, state: SystemState) -> int | None:
        return self._index.get(state)

    def probability(self, src: SystemState, dst: SystemState) -> float:
        i = self._index.get(src)
        j = self._index.get(dst)
        if i is None or j is None:
            return 0.0
        return float(self.matrix[i, j])

    def row(self, src: SystemState) -> dict[SystemState, float]:
        i = self._index[src]
        (cols,) = np.nonzero(self.matrix[i])
        return {self.states[j]: float(self.matrix[i, j]) for j in cols}


def slot_transitions(
    params: QueueParams, count: int, phase: int, join: float
) -> dict[tuple[int, int], float]:
    """Return the one-slot successor distribution of the snapshot (count, phase)."""

    out: dict[tuple[int, int], float] = defaultdict(float)
    mu = params.mu_b if phase == _BUSY else params.mu_v
    p_join = params.p * join

    join_branches = ((1, p_join), (0, 1.0 - p_join))
    serve_branches = ((1, mu), (0, 1.0 - mu)) if count >= 1 else ((0, 1.0),)

    for joined, pj in join_branches:
        if pj <= 0.0:
            continue
        for served, ps in serve_branches:
            nxt = count + joined - served
            if nxt == 0:
                phase_branches: tuple[tuple[int, float], ...] = ((_VACATION, 1.0),)
            elif phase == _BUSY:
                phase_branches = ((_BUSY, 1.0),)
            else:
                phase_branches = (
                    (_BUSY, params.theta),
                    (_VACATION, 1.0 - params.theta),
                )
            for nxt_phase, pv in phase_branches:
                mass = pj * ps * pv
                if mass > 0.0:
                    out[(nxt, nxt_phase)] += mass
    return dict(out)


def build_chain(
    params: QueueParams, join_rule: JoinRule, *, max_level: int | None = None
) -> ChainMatrix:
    """Enumerate the states reachable from (0, vacation) and fill the matrix.

    With `max_level`, arrivals never join at that count, which makes the top
    level reflecting (the arrival mass folds into the no-join branches).
    """

    def join_at(count: int, phase: int) -> float:
        if max_level is not None and count >= max_level:
            return 0.0
        return join_rule(count, phase)

    start = (0, _VACATION)
    rows: dict[tuple[int, int], dict[tuple[int, int], float]] = {}
    frontier = deque([start])
    seen = {start}
    while frontier:
        state = frontier.popleft()
        successors = slot_transitions(params, state[0], state[1], join_at(*state))
        rows[state] = successors
        for nxt in successors:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
        if len(seen) > MAX_STATES:
            raise InvalidParameter(
                "max_level", max_level, f"state space exceeds {MAX_STATES} states"
            )

    keys = sorted(rows)
    index = {key: i for i, key in enumerate(keys)}
    matrix = np.zeros((len(keys), len(keys)))
    for key, successors in rows.items():
        i = index[key]
        for nxt, mass in successors.items():
            matrix[i, index[nxt]] += mass

    states = tuple(SystemState(count, ServerPhase(phase)) for count, phase in keys)
    logger.debug("built chain with %d states (max_level=%s)", len(states), max_level)
    return ChainMatrix(states=states, matrix=matrix)


def stationary_vector(matrix: np.ndarray) -> np.ndarray:
    """Solve πP = π, Σπ = 1 by replacing one balance equation with normalization."""

    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if matrix.ndim != 2 or matrix.shape[1] != n:
        raise InvalidParameter("matrix", matrix.shape, "must be square")
    if n == 1:
        return np.ones(1)

    n_components, _ = connected_components(
        csr_matrix(matrix > 0.0), directed=True, connection="strong"
    )
    if n_components > 1:
        raise SingularSystem(f"chain is reducible ({n_components} classes)")

    system = (matrix - np.eye(n)).T
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc

    if pi.min() < -1e-10:
        raise SingularSystem(f"negative stationary mass {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


# ----------------------------------------------------------------------------
# Tagged-customer sojourn times
# ----------------------------------------------------------------------------


def vacation_remaining_means(params: QueueParams, kmax: int) -> np.ndarray:
    """Mean remaining slots for a customer in position k at a vacation slot start.

    Entry k covers k customers up to and including the tagged one, k = 0..kmax.
    The regular-service counterpart is k / mu_b.
    """

    mu_v, theta = params.mu_v, params.theta
    stay = (1.0 - mu_v) * (1.0 - theta)
    means = np.zeros(kmax + 1)
    for k in range(1, kmax + 1):
        means[k] = (
            1.0
            + mu_v * theta * (k - 1) / params.mu_b
            + mu_v * (1.0 - theta) * means[k - 1]
            + (1.0 - mu_v) * theta * k / params.mu_b
        ) / (1.0 - stay)
    return means


def tagged_mean_sojourn(
    params: QueueParams, state: SystemState, vacation_means: np.ndarray | None = None
) -> float:
    """Exact mean sojourn of a customer who joins after observing `state`."""

    n = state.count
    if state.phase is ServerPhase.BUSY:
        return (n + params.mu_b_bar) / params.mu_b

    if vacation_means is None or len(vacation_means) < n + 2:
        vacation_means = vacation_remaining_means(params, n + 1)
    theta = params.theta

    def after_slot(k: int) -> float:
        return theta * k / params.mu_b + (1.0 - theta) * vacation_means[k]

    if n == 0:
        return after_slot(1)
    return params.mu_v * after_slot(n) + params.mu_v_bar * after_slot(n + 1)


def joined_mean_sojourn(
    params: QueueParams,
    chain: ChainMatrix,
    pi: np.ndarray,
    join_rule: JoinRule,
    phase: ServerPhase | None = None,
) -> float:
    """Mean sojourn over joining customers, optionally those joining in `phase`."""

    kmax = max(state.count for state in chain.states) + 1
    vacation_means = vacation_remaining_means(params, kmax)
    weight = 0.0
    total = 0.0
    for state, mass in zip(chain.states, pi, strict=True):
        if phase is not None and state.phase is not phase:
            continue
        w = mass * join_rule(state.count, int(state.phase))
        if w > 0.0:
            weight += w
            total += w * tagged_mean_sojourn(params, state, vacation_means)
    if weight == 0.0:
        return float("nan")
    return total / weight


def mean_count(chain: ChainMatrix, pi: np.ndarray) -> float:
    counts = np.array([state.count for state in chain.states], dtype=float)
    return float(counts @ pi)


def join_rate(
    params: QueueParams,
    chain: ChainMatrix,
    pi: np.ndarray,
    join_rule: JoinRule,
    *,
    max_level: int | None = None,
) -> float:
    """Expected joins per slot: p · Σ π(s) q(s)."""

    total = 0.0
    for state, mass in zip(chain.states, pi, strict=True):
        if max_level is not None and state.count >= max_level:
            continue
        total += mass * join_rule(state.count, int(state.phase))
    return params.p * total


# ----------------------------------------------------------------------------
# Solved chains
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChainSolution:
    """A chain together with its stationary vector and the join rule it encodes."""

    chain: ChainMatrix
    pi: np.ndarray
    join_rule: JoinRule
    max_level: int | None = None

    def probability(self, state: SystemState) -> float:
        i = self.chain.index_of(state)
        return 0.0 if i is None else float(self.pi[i])

    def as_dict(self) -> dict[SystemState, float]:
        return {s: float(m) for s, m in zip(self.chain.states, self.pi, strict=True)}

    def mean_count(self) -> float:
        return mean_count(self.chain, self.pi)

    def join_rate(self, params: QueueParams) -> float:
        return join_rate(
            params, self.chain, self.pi, self.join_rule, max_level=self.max_level
        )


def solve_chain(
    params: QueueParams, join_rule: JoinRule, *, max_level: int | None = None
) -> ChainSolution:
    chain = build_chain(params, join_rule, max_level=max_level)
    return ChainSolution(
        chain=chain,
        pi=stationary_vector(chain.matrix),
        join_rule=join_rule,
        max_level=max_level,
    )
