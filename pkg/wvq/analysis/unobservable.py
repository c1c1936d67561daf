"""Unobservable queue: an arrival sees nothing and joins with probability q.

The mean sojourn comes from a stochastic decomposition of the working-vacation
queue length into the classical Geo/Geo/1 part and a vacation correction. The
finite-chain value (Little's law on the truncated chain) is exposed next to it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from wvq.analysis import partial
from wvq.engine.chain import ChainSolution
from wvq.engine.search import golden_section_max, grid_argmax, three_way_root
from wvq.errors import DivisionHazard, InvalidParameter, Unstable
from wvq.model import EconParams, QueueParams, busy_traffic_ratio, is_unstable
from wvq.strategy import MixedPair

logger = logging.getLogger(__name__)

RATIO_GUARD = 1e-14
GRID_STEP = 0.001
REFINE_TOL = 1e-8


@dataclass(frozen=True)
class UnobservableDerived:
    r_p: float
    sigma: float
    delta1: float
    delta2: float
    k_star: float
    alpha_p: float


def _check_q(q: float) -> None:
    if not 0.0 <= q <= 1.0:
        raise InvalidParameter("q", q, "must lie in [0, 1]")


def derived_quantities(params: QueueParams, q: float) -> UnobservableDerived:
    _check_q(q)
    lam = params.p * q
    if lam <= 0.0:
        raise InvalidParameter("q", q, "zero traffic has no decomposition")
    alpha_p = busy_traffic_ratio(lam, params.mu_b)
    if is_unstable(alpha_p):
        raise Unstable("alpha_p", alpha_p)

    r_p, _ = partial.vacation_level_ratios(params, lam)
    if r_p < RATIO_GUARD:
        raise DivisionHazard(f"r'={r_p:.3e} is too small to divide by")

    spread = lam + r_p * (1.0 - lam)
    sigma = r_p / spread
    delta1 = (
        lam**2
        * params.mu_b_bar
        * params.theta_bar
        * params.mu_v
        * (1.0 - r_p) ** 2
        / r_p
    )
    delta2 = (
        lam
        * params.theta_bar
        * spread
        * ((1.0 - r_p) / r_p)
        * (params.mu_b - params.mu_v)
    )
    k_star = 1.0 / (delta1 / lam + delta2 / lam * (1.0 - (1.0 - lam) * sigma))
    return UnobservableDerived(
        r_p=r_p,
        sigma=sigma,
        delta1=delta1,
        delta2=delta2,
        k_star=k_star,
        alpha_p=alpha_p,
    )


def zero_traffic_mean_sojourn(params: QueueParams) -> float:
    """Limit of `mean_sojourn` as p·q -> 0: one service started on vacation."""

    mu_b, mu_v, theta, tb = params.mu_b, params.mu_v, params.theta, params.theta_bar
    return (theta + tb * mu_b) / (mu_b * (theta + tb * mu_v))


def mean_sojourn(params: QueueParams, q: float) -> float:
    """Mean sojourn of a joining customer from the decomposition.

    Below the r' guard (and at q = 0) the zero-traffic limit is returned.
    """

    _check_q(q)
    if params.p * q == 0.0:
        return zero_traffic_mean_sojourn(params)
    try:
        d = derived_quantities(params, q)
    except DivisionHazard:
        logger.debug(
            "r' below %g at q=%g; using the zero-traffic limit", RATIO_GUARD, q
        )
        return zero_traffic_mean_sojourn(params)
    lam = params.p * q
    classical = 1.0 / (params.mu_b * (1.0 - d.alpha_p))
    correction = (
        d.k_star
        * d.delta2
        / lam
        * (1.0 - (1.0 - lam) * d.sigma)
        * d.sigma
        / (1.0 - d.sigma)
    )
    return classical + correction


def net_benefit(params: QueueParams, econ: EconParams, q: float) -> float:
    """R − C·E[W]; at q = 0 the benefit of a lone customer in an empty system."""

    return econ.reward - econ.cost * mean_sojourn(params, q)


def _benefit_or_ninf(params: QueueParams, econ: EconParams, q: float) -> float:
    try:
        return net_benefit(params, econ, q)
    except Unstable:
        return -math.inf


def equilibrium_join_probability(params: QueueParams, econ: EconParams) -> float:
    return three_way_root(lambda q: _benefit_or_ninf(params, econ, q))


def social_benefit(params: QueueParams, econ: EconParams, q: float) -> float:
    _check_q(q)
    if q == 0.0:
        return 0.0
    return params.p * q * (econ.reward - econ.cost * mean_sojourn(params, q))


def _social_or_ninf(params: QueueParams, econ: EconParams, q: float) -> float:
    try:
        return social_benefit(params, econ, q)
    except Unstable:
        return -math.inf


def socially_optimal_join_probability(params: QueueParams, econ: EconParams) -> float:
    """Grid search at step 0.001, then golden-section refinement near the best point.

    Ties go to the smaller q; refinement moves only on a strict improvement.
    """

    grid = np.linspace(0.0, 1.0, round(1.0 / GRID_STEP) + 1)
    values = np.array([_social_or_ninf(params, econ, float(q)) for q in grid])
    (i,) = grid_argmax(values)
    best_q, best = float(grid[i]), float(values[i])
    lo, hi = max(0.0, best_q - GRID_STEP), min(1.0, best_q + GRID_STEP)
    if hi > lo:
        q, value = golden_section_max(
            lambda x: _social_or_ninf(params, econ, x), lo, hi, tol=REFINE_TOL
        )
        if value > best:
            best_q = q
    return best_q


# ----------------------------------------------------------------------------
# Diagnostics
# ----------------------------------------------------------------------------


def regime_mixture_mean_sojourn(params: QueueParams, q: float) -> float:
    """Phase-conditional means of the partially observable queue, mixed by phase."""

    mixed = MixedPair(q, q)
    dist = partial.stationary_distribution(params, mixed)
    prob_vacation, prob_busy = partial.regime_probabilities(dist)
    vacation = partial.conditional_mean_sojourn_vacation(params, mixed)
    if prob_busy <= 0.0:
        return vacation
    busy = partial.conditional_mean_sojourn_busy(params, mixed)
    return prob_vacation * vacation + prob_busy * busy


def _truncated(params: QueueParams, q: float, level: int | None) -> ChainSolution:
    return partial.truncated_chain_oracle(params, MixedPair(q, q), level)


def exact_mean_sojourn(
    params: QueueParams, q: float, level: int | None = None
) -> float:
    """Mean sojourn from the truncated slot chain, by Little's law."""

    _check_q(q)
    if q == 0.0:
        raise InvalidParameter("q", q, "no customer ever joins")
    solution = _truncated(params, q, level)
    logger.debug("exact sojourn at q=%g from %d states", q, len(solution.chain))
    return solution.mean_count() / solution.join_rate(params)


def exact_social_benefit(
    params: QueueParams, econ: EconParams, q: float, level: int | None = None
) -> float:
    _check_q(q)
    if q == 0.0:
        return 0.0
    solution = _truncated(params, q, level)
    joins = solution.join_rate(params)
    return econ.reward * joins - econ.cost * solution.mean_count()
