"""Partially observable queue: an arriving customer sees the phase but not the count.

Customers join with probability q0 during a working vacation and q1 during a
regular busy period, so the effective arrival rates are p·q0 and p·q1. The
resulting level-independent QBD has an upper-triangular 2×2 rate matrix and a
matrix-geometric stationary distribution with scalar closed forms.

Design goals:

- Every closed form is checked against a truncated finite chain built by the
  same slot rule the simulator and the observable module use.
- Equilibrium solve is sequential: the vacation-phase benefit does not depend
  on q1, so q0 is fixed first.
- Unstable busy periods count as benefit −inf for the solvers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from wvq.analysis.observable import VacationKernels
from wvq.engine.chain import ChainSolution, solve_chain
from wvq.engine.search import grid_argmax, refine_max, three_way_root
from wvq.errors import (
    ConvergenceFailure,
    InvalidParameter,
    NumericalInstability,
    Unstable,
)
from wvq.model import (
    EconParams,
    QueueParams,
    ServerPhase,
    SystemState,
    busy_traffic_ratio,
    is_unstable,
)
from wvq.strategy import MixedPair

logger = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-12
MAX_TRUNCATION_LEVEL = 9_000
GRID_STEP = 0.01
REFINE_TOL = 1e-6
MAX_REFINE_PASSES = 200


@dataclass(frozen=True)
class QbdRateMatrix:
    r: float
    r12: float
    alpha_t: float
    r_conjugate: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.r, self.r12], [0.0, self.alpha_t]])


@dataclass(frozen=True)
class LevelBlocks:
    """Level-independent blocks: down one level, same level, up one level."""

    down: np.ndarray
    local: np.ndarray
    up: np.ndarray


def _effective_rates(params: QueueParams, q: MixedPair) -> tuple[float, float]:
    return params.p * q.q0, params.p * q.q1


def vacation_level_ratios(params: QueueParams, p0: float) -> tuple[float, float]:
    """Roots of p̄0·μv·x² − (β + p0·μ̄v + p̄0·μv)·x + p0·μ̄v, smaller first."""

    beta = params.theta / params.theta_bar
    quad = (1.0 - p0) * params.mu_v
    lin = beta + p0 * params.mu_v_bar + quad
    const = p0 * params.mu_v_bar
    big = (lin + math.sqrt(lin * lin - 4.0 * quad * const)) / (2.0 * quad)
    return const / (quad * big), big


def minimal_rate_matrix(params: QueueParams, q: MixedPair) -> QbdRateMatrix:
    p0, p1 = _effective_rates(params, q)
    r, r_conjugate = vacation_level_ratios(params, p0)
    r12 = r * params.theta / (params.theta_bar * (1.0 - p1) * params.mu_b * (1.0 - r))
    return QbdRateMatrix(
        r=r,
        r12=r12,
        alpha_t=busy_traffic_ratio(p1, params.mu_b),
        r_conjugate=r_conjugate,
    )


def level_blocks(params: QueueParams, q: MixedPair) -> LevelBlocks:
    p0, p1 = _effective_rates(params, q)
    mv, mvb = params.mu_v, params.mu_v_bar
    mb, mbb = params.mu_b, params.mu_b_bar
    theta, tb = params.theta, params.theta_bar
    vac_hold = 1.0 - p0 * mvb - (1.0 - p0) * mv
    return LevelBlocks(
        down=np.array(
            [[(1.0 - p0) * mv * tb, (1.0 - p0) * mv * theta], [0.0, (1.0 - p1) * mb]]
        ),
        local=np.array(
            [
                [tb * vac_hold, theta * vac_hold],
                [0.0, 1.0 - p1 * mbb - (1.0 - p1) * mb],
            ]
        ),
        up=np.array([[p0 * mvb * tb, p0 * mvb * theta], [0.0, p1 * mbb]]),
    )


def rate_matrix_residual(params: QueueParams, q: MixedPair) -> float:
    """‖R²·down + R·local + up − R‖∞ for the closed-form R."""

    rate = minimal_rate_matrix(params, q).as_array()
    blocks = level_blocks(params, q)
    residual = rate @ rate @ blocks.down + rate @ blocks.local + blocks.up - rate
    return float(np.abs(residual).max())


# ----------------------------------------------------------------------------
# Stationary distribution
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PartialStationary:
    params: QueueParams
    q: MixedPair
    k_const: float
    r: float
    alpha_t: float
    p0: float
    p1: float

    @property
    def empty(self) -> float:
        params = self.params
        vacation_exit = params.theta_bar * (1.0 - self.p0) * params.mu_v
        return self.k_const * (params.theta + vacation_exit * (1.0 - self.r))

    @property
    def _busy_scale(self) -> float:
        scale = self.k_const * self.p0 * self.params.theta
        return scale / ((1.0 - self.p1) * self.params.mu_b)

    def vacation_level(self, k: int) -> float:
        if k == 0:
            return self.empty
        scale = self.k_const * self.p0 * self.params.theta_bar
        return scale * (1.0 - self.r) * self.r ** (k - 1)

    def busy_level(self, k: int) -> float:
        if k == 0:
            return 0.0
        r, a = self.r, self.alpha_t
        if abs(r - a) > 1e-9:
            spread = (r**k - a**k) / (r - a)
        else:
            spread = math.fsum(r**j * a ** (k - 1 - j) for j in range(k))
        return self._busy_scale * spread

    def probability(self, state: SystemState) -> float:
        if state.phase is ServerPhase.BUSY:
            return self.busy_level(state.count)
        return self.vacation_level(state.count)

    def total(self) -> float:
        prob_vacation, prob_busy = regime_probabilities(self)
        return prob_vacation + prob_busy


def stationary_distribution(params: QueueParams, q: MixedPair) -> PartialStationary:
    rate = minimal_rate_matrix(params, q)
    if is_unstable(rate.alpha_t):
        raise Unstable("alpha_t", rate.alpha_t)
    p0, p1 = _effective_rates(params, q)
    r, a = rate.r, rate.alpha_t
    theta, tb = params.theta, params.theta_bar
    base = (1.0 - p1) * params.mu_b * (1.0 - r) * (1.0 - a)
    vacation_mass = theta + tb * (1.0 - p0) * params.mu_v * (1.0 - r) + p0 * tb
    k_const = base / (base * vacation_mass + p0 * theta)
    return PartialStationary(
        params=params, q=q, k_const=k_const, r=r, alpha_t=a, p0=p0, p1=p1
    )


def regime_probabilities(dist: PartialStationary) -> tuple[float, float]:
    params = dist.params
    r, a = dist.r, dist.alpha_t
    prob_vacation = dist.k_const * (
        params.theta / (1.0 - r) + params.theta_bar * params.mu_v
    )
    prob_busy = (
        dist.k_const
        * dist.p0
        * params.theta
        / ((1.0 - dist.p1) * params.mu_b * (1.0 - a) * (1.0 - r))
    )
    return prob_vacation, prob_busy


def conditional_mean_queue_lengths(dist: PartialStationary) -> tuple[float, float]:
    params = dist.params
    r, a = dist.r, dist.alpha_t
    vacation = (
        dist.p0
        * params.theta_bar
        / (params.theta + params.theta_bar * params.mu_v * (1.0 - r))
    )
    busy = (1.0 - r * a) / ((1.0 - a) * (1.0 - r))
    return vacation, busy


def mean_queue_length(dist: PartialStationary) -> float:
    params = dist.params
    r, a = dist.r, dist.alpha_t
    return (dist.k_const * dist.p0 / (1.0 - r)) * (
        params.theta_bar
        + params.theta
        * (1.0 - r * a)
        / ((1.0 - dist.p1) * params.mu_b * (1.0 - r) * (1.0 - a) ** 2)
    )


def truncation_level(
    params: QueueParams, q: MixedPair, *, tol: float = TAIL_TOLERANCE
) -> int:
    """Smallest level N whose geometric tail bound K·ρ^N/(1−ρ) is below `tol`."""

    dist = stationary_distribution(params, q)
    rho = max(dist.r, dist.alpha_t)
    if rho <= 0.0:
        return 2
    level = math.ceil(math.log(tol * (1.0 - rho) / dist.k_const) / math.log(rho))
    level = max(level, 2) + 1
    if level > MAX_TRUNCATION_LEVEL:
        raise ConvergenceFailure(
            f"truncation level {level} for rho={rho:.6g} is too deep"
        )
    logger.debug("truncation level %d for rho=%.6g", level, rho)
    return level


def truncated_chain_oracle(
    params: QueueParams, q: MixedPair, level: int | None = None
) -> ChainSolution:
    """Linear solve of the finite chain whose top level `level` is reflecting."""

    if level is None:
        level = truncation_level(params, q)
    if level < 1:
        raise InvalidParameter("level", level, "must be >= 1")
    return solve_chain(params, q.join_probability, max_level=level)


# ----------------------------------------------------------------------------
# Sojourn times
# ----------------------------------------------------------------------------


def _check_z(z: float) -> None:
    if z < 0.0:
        raise InvalidParameter("z", z, "must be >= 0")


def sojourn_pgf_busy_phase(params: QueueParams, q: MixedPair, z: float) -> float:
    """PGF of the sojourn of a customer who joins during a regular busy period."""

    _check_z(z)
    rate = minimal_rate_matrix(params, q)
    if is_unstable(rate.alpha_t):
        raise Unstable("alpha_t", rate.alpha_t)
    r, a = rate.r, rate.alpha_t
    mu = params.mu_b
    g = mu * z / (1.0 - (1.0 - mu) * z)
    return (
        mu
        / (1.0 - (1.0 - mu) * z)
        * g
        * (1.0 - r)
        * (1.0 - a)
        / ((1.0 - r * g) * (1.0 - a * g))
    )


def conditional_mean_sojourn_busy(params: QueueParams, q: MixedPair) -> float:
    rate = minimal_rate_matrix(params, q)
    if is_unstable(rate.alpha_t):
        raise Unstable("alpha_t", rate.alpha_t)
    r, a = rate.r, rate.alpha_t
    mu = params.mu_b
    return 1.0 / (mu * (1.0 - r)) + (mu * a - mu + 1.0) / (mu * (1.0 - a))


@dataclass(frozen=True)
class _VacationArrivalView:
    """Unnormalized masses a vacation-phase arrival sees (K = 1)."""

    r: float
    tail: float
    empty: float
    total: float

    @classmethod
    def of(cls, params: QueueParams, q0: float) -> _VacationArrivalView:
        p0 = params.p * q0
        r, _ = vacation_level_ratios(params, p0)
        theta, tb = params.theta, params.theta_bar
        return cls(
            r=r,
            tail=p0 * tb * (1.0 - r),
            empty=theta + tb * (1.0 - p0) * params.mu_v * (1.0 - r),
            total=theta / (1.0 - r) + tb * params.mu_v,
        )

    def level_sum(self, x: float) -> float:
        """Σ_{k>=1} π_k0 x^k."""

        return self.tail * x / (1.0 - self.r * x)


def sojourn_pgf_vacation_phase(params: QueueParams, q: MixedPair, z: float) -> float:
    """PGF of the sojourn of a customer who joins during a working vacation."""

    _check_z(z)
    view = _VacationArrivalView.of(params, q.q0)
    kern = VacationKernels.at(params, z)
    a, b, g = kern.a, kern.b, kern.g
    mu_v, mu_v_bar = params.mu_v, params.mu_v_bar
    gap = g - a
    if abs(gap) < 1e-14:
        return _vacation_phase_pgf_series(params, view, kern)
    switch = b * g / gap
    queued = (mu_v + mu_v_bar * a) * (1.0 - switch) * view.level_sum(a) + (
        mu_v + mu_v_bar * g
    ) * switch * view.level_sum(g)
    return (queued + view.empty * kern.own_service) / view.total


def _vacation_phase_pgf_series(
    params: QueueParams, view: _VacationArrivalView, kern: VacationKernels
) -> float:
    total = view.empty * kern.own_service
    k = 1
    weight = view.tail
    while weight > 1e-17 * view.total:
        total += weight * (
            params.mu_v * kern.services(k) + params.mu_v_bar * kern.services(k + 1)
        )
        weight *= view.r
        k += 1
    return total / view.total


def conditional_mean_sojourn_vacation(params: QueueParams, q: MixedPair) -> float:
    """Mean sojourn of a customer who joins during a working vacation.

    At q0 = 0 every vacation-phase arrival finds the system empty and the value
    is the mean of one service started on vacation.
    """

    view = _VacationArrivalView.of(params, q.q0)
    mu_b, mu_v, theta, tb = params.mu_b, params.mu_v, params.theta, params.theta_bar
    c = theta + tb * mu_v
    if c <= 0.0:
        raise NumericalInstability("vacation exit rate vanishes")
    decay = mu_v * tb / c
    drift = tb * (mu_b - mu_v) / (theta * mu_b)
    own_service = (theta + tb * mu_b) / (mu_b * c)

    count_mass = view.level_sum(1.0)
    count_first_moment = count_mass / (1.0 - view.r)
    decay_mass = view.level_sum(decay)
    queued = (
        count_first_moment / mu_b
        + count_mass * params.mu_v_bar / mu_b
        + drift * count_mass
        - drift * (mu_v + params.mu_v_bar * decay) * decay_mass
    )
    return (queued + view.empty * own_service) / view.total


# ----------------------------------------------------------------------------
# Strategic behaviour
# ----------------------------------------------------------------------------


def net_benefit_vacation(params: QueueParams, econ: EconParams, q0: float) -> float:
    q = MixedPair(q0, 0.0)
    return econ.reward - econ.cost * conditional_mean_sojourn_vacation(params, q)


def net_benefit_busy(
    params: QueueParams, econ: EconParams, q0: float, q1: float
) -> float:
    mean = conditional_mean_sojourn_busy(params, MixedPair(q0, q1))
    return econ.reward - econ.cost * mean


def equilibrium_mixed(params: QueueParams, econ: EconParams) -> MixedPair:
    q0 = three_way_root(lambda x: net_benefit_vacation(params, econ, x))

    def busy(x: float) -> float:
        try:
            return net_benefit_busy(params, econ, q0, x)
        except Unstable:
            return -math.inf

    q1 = three_way_root(busy)
    if q1 == 0.0 and busy(0.0) < 0.0:
        logger.debug("busy-phase benefit negative at q1=0; equilibrium q1 clamped to 0")
    return MixedPair(min(max(q0, 0.0), 1.0), min(max(q1, 0.0), 1.0))


def social_benefit(params: QueueParams, econ: EconParams, q: MixedPair) -> float:
    """Reward of joining customers minus waiting cost, per slot."""

    dist = stationary_distribution(params, q)
    prob_vacation, prob_busy = regime_probabilities(dist)
    joins = params.p * (prob_vacation * q.q0 + prob_busy * q.q1)
    return econ.reward * joins - econ.cost * mean_queue_length(dist)


def _social_or_ninf(
    params: QueueParams, econ: EconParams, q0: float, q1: float
) -> float:
    try:
        return social_benefit(params, econ, MixedPair(q0, q1))
    except Unstable:
        return -math.inf


def socially_optimal_mixed(params: QueueParams, econ: EconParams) -> MixedPair:
    """Grid search over [0,1]² at step 0.01, then coordinate ascent to a standstill.

    Ties go to the lexicographically smallest grid point; refinement moves only
    on a strict improvement.
    """

    grid = np.linspace(0.0, 1.0, round(1.0 / GRID_STEP) + 1)
    values = np.array(
        [
            [_social_or_ninf(params, econ, float(a), float(b)) for b in grid]
            for a in grid
        ]
    )
    i, j = grid_argmax(values)
    q0, q1, best = float(grid[i]), float(grid[j]), float(values[i, j])
    for _ in range(MAX_REFINE_PASSES):
        start = best
        q0, best = refine_max(
            lambda x, fixed=q1: _social_or_ninf(params, econ, x, fixed),
            q0,
            best,
            radius=GRID_STEP,
            tol=REFINE_TOL,
        )
        q1, best = refine_max(
            lambda y, fixed=q0: _social_or_ninf(params, econ, fixed, y),
            q1,
            best,
            radius=GRID_STEP,
            tol=REFINE_TOL,
        )
        if best - start <= 1e-14 * max(1.0, abs(best)):
            break
    else:
        logger.debug("coordinate refinement stopped after %d passes", MAX_REFINE_PASSES)
    return MixedPair(q0, q1)
