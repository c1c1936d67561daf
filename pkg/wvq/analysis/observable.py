"""Observable queue: an arriving customer sees both the count and the phase.

Design goals:

- Closed-form sojourn means and PGFs for a customer joining at (n, phase).
- Equilibrium and socially optimal threshold pairs.
- Stationary distribution under a threshold pair, in closed form where the
  closed form applies and by a direct linear solve otherwise. The linear solve
  is the reference; the closed form is an optimization checked against it.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize

from wvq.engine.chain import (
    ChainMatrix,
    build_chain,
    stationary_vector,
    tagged_mean_sojourn,
)
from wvq.errors import (
    ConvergenceFailure,
    DegenerateRoots,
    InvalidParameter,
    NumericalInstability,
    Unstable,
    UnsupportedThresholdShape,
)
from wvq.model import (
    EconParams,
    QueueParams,
    ServerPhase,
    SystemState,
    busy_traffic_ratio,
    is_unstable,
)
from wvq.strategy import ThresholdPair

logger = logging.getLogger(__name__)

ROOT_SEPARATION = 1e-9
COEFFICIENT_GUARD = 1e-13
PGF_GUARD = 1e-14
MAX_THRESHOLD_STEPS = 10_000

VACATION = ServerPhase.VACATION
BUSY = ServerPhase.BUSY


class DistributionMethod(str, Enum):
    CLOSED_FORM = "closed_form"
    LINEAR_SOLVE = "linear_solve"


@dataclass(frozen=True)
class CharacteristicRoots:
    x1: float
    x2: float


@dataclass(frozen=True)
class ObservableCoefficients:
    a1t: float
    b1t: float
    c1t: float
    d1t: float
    a2t: float
    b2t: float
    b3t: float
    pi11: float
    h: float


@dataclass(frozen=True)
class ObservableStationary:
    probabilities: dict[SystemState, float]
    method: DistributionMethod
    coefficients: ObservableCoefficients | None = None

    def probability(self, state: SystemState) -> float:
        return self.probabilities.get(state, 0.0)

    def states(self) -> list[SystemState]:
        return sorted(self.probabilities)

    def total(self) -> float:
        return math.fsum(self.probabilities.values())

    def mean_count(self) -> float:
        return math.fsum(s.count * m for s, m in self.probabilities.items())

    def as_vector(self, states: Iterable[SystemState]) -> np.ndarray:
        return np.array([self.probability(s) for s in states])


# ----------------------------------------------------------------------------
# Sojourn times
# ----------------------------------------------------------------------------


def _regular_service_pgf(mu_b: float, z: float) -> float:
    return mu_b * z / (1.0 - (1.0 - mu_b) * z)


def _check_z(z: float) -> None:
    if z < 0.0:
        raise InvalidParameter("z", z, "must be >= 0")


def sojourn_pgf_busy(n: int, params: QueueParams, z: float) -> float:
    """PGF of the sojourn of a customer joining at (n, busy)."""

    if n < 1:
        raise InvalidParameter("n", n, "a busy server has at least one customer")
    _check_z(z)
    mu = params.mu_b
    return mu / (1.0 - (1.0 - mu) * z) * _regular_service_pgf(mu, z) ** n


def mean_sojourn_busy(n: int, params: QueueParams) -> float:
    if n < 1:
        raise InvalidParameter("n", n, "a busy server has at least one customer")
    return (n + 1) / params.mu_b - 1.0


@dataclass(frozen=True)
class VacationKernels:
    """One service that starts on vacation, split by how it ends.

    `a`: completes at the vacation rate; `b`: the vacation ends first and the
    service restarts at the regular rate, whose PGF is `g`.
    """

    a: float
    b: float
    g: float

    @classmethod
    def at(cls, params: QueueParams, z: float) -> VacationKernels:
        stay = 1.0 - params.mu_v_bar * params.theta_bar * z
        return cls(
            a=params.mu_v * params.theta_bar * z / stay,
            b=params.theta / stay,
            g=_regular_service_pgf(params.mu_b, z),
        )

    @property
    def own_service(self) -> float:
        return self.a + self.b * self.g

    def services(self, k: int) -> float:
        """PGF of k consecutive services, the first one starting on vacation."""

        total = self.a**k
        for j in range(k):
            total += self.b * self.a**j * self.g ** (k - j)
        return total


def vacation_pgf_double_sum(n: int, params: QueueParams, z: float) -> float:
    """Unsimplified form of `sojourn_pgf_vacation`, summed term by term."""

    kern = VacationKernels.at(params, z)
    ahead = params.mu_v * kern.services(n) + params.mu_v_bar * kern.services(n + 1)
    return ahead * kern.own_service


def sojourn_pgf_vacation(n: int, params: QueueParams, z: float) -> float:
    """PGF of the sojourn of a customer joining at (n, vacation).

    Normalized so that the value at z=1 is 1 and the derivative there equals
    `mean_sojourn_vacation`. Falls back to the double sum when the simplified
    form's denominator vanishes.
    """

    if n < 0:
        raise InvalidParameter("n", n, "must be >= 0")
    _check_z(z)
    try:
        return _vacation_pgf_closed(n, params, z)
    except NumericalInstability:
        logger.debug("vacation PGF at z=%g uses the double-sum form", z)
        return vacation_pgf_double_sum(n, params, z)


def _vacation_pgf_closed(n: int, params: QueueParams, z: float) -> float:
    kern = VacationKernels.at(params, z)
    a, b, g = kern.a, kern.b, kern.g
    gap = g - a
    if abs(gap) < PGF_GUARD:
        raise NumericalInstability(f"vacation PGF denominator {gap:.3e}")
    switch = b * g / gap
    mu_v, mu_v_bar = params.mu_v, params.mu_v_bar
    ahead = a**n * (mu_v + mu_v_bar * a) * (1.0 - switch) + switch * g**n * (
        mu_v + mu_v_bar * g
    )
    return ahead * kern.own_service


def _vacation_decay(params: QueueParams) -> float:
    mu_v, theta = params.mu_v, params.theta
    return (mu_v - mu_v * theta) / (theta + mu_v - theta * mu_v)


def _own_service_mean(params: QueueParams) -> float:
    mu_b, mu_v, theta = params.mu_b, params.mu_v, params.theta
    return (theta + mu_b - theta * mu_b) / (mu_b * (theta + mu_v - theta * mu_v))


def mean_sojourn_vacation(n: int, params: QueueParams) -> float:
    if n < 0:
        raise InvalidParameter("n", n, "must be >= 0")
    return _vacation_mean(float(n), params)


def _vacation_drift(params: QueueParams) -> float:
    return (params.mu_b - params.mu_v) / (params.theta * params.mu_b)


def _vacation_mean(x: float, params: QueueParams) -> float:
    # Real-valued in x so the continuous equilibrium variant can root-find on it.
    return (
        (x + 1.0) / params.mu_b
        - 1.0
        + _vacation_drift(params) * (1.0 - _vacation_decay(params) ** (x + 1.0))
        + _own_service_mean(params)
    )


def exact_mean_sojourn(state: SystemState, params: QueueParams) -> float:
    """Slot-accurate mean sojourn of a customer joining after observing `state`."""

    return tagged_mean_sojourn(params, state)


def net_benefit(
    phase: ServerPhase, n: int, params: QueueParams, econ: EconParams
) -> float:
    if phase == BUSY:
        mean = mean_sojourn_busy(n, params)
    else:
        mean = mean_sojourn_vacation(n, params)
    return econ.reward - econ.cost * mean


# ----------------------------------------------------------------------------
# Equilibrium thresholds
# ----------------------------------------------------------------------------


def _busy_benefit(n: int, params: QueueParams, econ: EconParams) -> float:
    return econ.reward - econ.cost * ((n + 1) / params.mu_b - 1.0)


def _adjust_threshold(start: int, benefit: Callable[[int], float]) -> int:
    """Largest n >= -1 with benefit(n) >= 0, reached by unit steps from `start`.

    `benefit` must be nonnegative on [0, N] and negative above N.
    """

    n = max(start, -1)
    for _ in range(MAX_THRESHOLD_STEPS):
        if benefit(n + 1) >= 0.0:
            n += 1
        elif n >= 0 and benefit(n) < 0.0:
            n -= 1
        else:
            return n
    raise ConvergenceFailure(f"threshold search did not settle near {start}")


def _busy_threshold(params: QueueParams, econ: EconParams) -> int:
    start = math.floor(params.mu_b * (econ.reward / econ.cost + 1.0) - 1.0)
    return _adjust_threshold(start, lambda n: _busy_benefit(n, params, econ))


def _vacation_benefit(x: float, params: QueueParams, econ: EconParams) -> float:
    return econ.reward - econ.cost * _vacation_mean(x, params)


def _vacation_mean_is_increasing(params: QueueParams) -> bool:
    # Differences are 1/mu_b plus a shrinking geometric term of fixed sign.
    return _vacation_mean(1.0, params) > _vacation_mean(0.0, params)


def _vacation_root_bounds(params: QueueParams, econ: EconParams) -> tuple[float, float]:
    """Estimate and upper bound of the real root of the vacation benefit.

    The estimate drops the geometric term; the bound replaces it by its most
    favourable value.
    """

    drift = _vacation_drift(params)
    level = econ.reward / econ.cost + 1.0 - _own_service_mean(params)
    estimate = params.mu_b * (level - drift) - 1.0
    bound = params.mu_b * (level - min(drift, 0.0)) - 1.0
    return estimate, bound


def equilibrium_thresholds(params: QueueParams, econ: EconParams) -> ThresholdPair:
    """Vacation threshold: the last n before the vacation benefit turns negative.

    The benefit is nonnegative on an initial run of n and negative after it, so
    the search starts at the closed-form estimate and moves by unit steps.
    """

    if not _vacation_mean_is_increasing(params):
        logger.warning(
            "vacation sojourn mean not increasing at n=1 (%.12g <= %.12g)",
            mean_sojourn_vacation(1, params),
            mean_sojourn_vacation(0, params),
        )
    if _vacation_benefit(0.0, params, econ) < 0.0:
        n0 = -1
    else:
        estimate, _ = _vacation_root_bounds(params, econ)
        n0 = _adjust_threshold(
            max(math.floor(estimate), 0),
            lambda n: _vacation_benefit(float(n), params, econ),
        )
    return ThresholdPair(n0, _busy_threshold(params, econ))


def equilibrium_thresholds_continuous(
    params: QueueParams, econ: EconParams
) -> ThresholdPair:
    """Root of the real-valued vacation benefit, floored."""

    if _vacation_benefit(0.0, params, econ) < 0.0:
        n0 = -1
    else:
        _, bound = _vacation_root_bounds(params, econ)
        root = optimize.brentq(
            lambda x: _vacation_benefit(x, params, econ),
            0.0,
            max(bound, 0.0),
            xtol=1e-12,
        )
        n0 = math.floor(root)
    return ThresholdPair(n0, _busy_threshold(params, econ))


# ----------------------------------------------------------------------------
# Stationary distribution
# ----------------------------------------------------------------------------


def characteristic_roots(params: QueueParams) -> CharacteristicRoots:
    """Roots of θ̄p̄μ_ν x² − (θ + θ̄pμ̄_ν + θ̄p̄μ_ν) x + θ̄pμ̄_ν = 0."""

    p, pb = params.p, params.p_bar
    mv, mvb = params.mu_v, params.mu_v_bar
    theta, tb = params.theta, params.theta_bar
    quad = tb * pb * mv
    lin = theta + tb * p * mvb + tb * pb * mv
    const = tb * p * mvb
    x1 = (lin + math.sqrt(lin * lin - 4.0 * quad * const)) / (2.0 * quad)
    x2 = const / (quad * x1)
    if abs(x1 - x2) < ROOT_SEPARATION:
        raise DegenerateRoots(f"x1={x1:.15g} and x2={x2:.15g} coincide")
    return CharacteristicRoots(x1=x1, x2=x2)


def _guard(value: float, what: str) -> float:
    if abs(value) < COEFFICIENT_GUARD:
        raise NumericalInstability(f"{what} vanishes ({value:.3e})")
    return value


def closed_form_distribution(
    params: QueueParams, thresholds: ThresholdPair
) -> ObservableStationary:
    """Closed-form stationary distribution for n0 >= 2 and n1 >= n0 + 2."""

    n0, n1 = thresholds.n0, thresholds.n1
    if n0 < 2 or n1 < n0 + 2:
        raise UnsupportedThresholdShape(
            f"closed form needs n0 >= 2 and n1 >= n0 + 2, got ({n0}, {n1})"
        )
    alpha = busy_traffic_ratio(params.p, params.mu_b)
    if is_unstable(alpha):
        raise Unstable("alpha", alpha)
    roots = characteristic_roots(params)
    x1, x2 = roots.x1, roots.x2

    p, pb = params.p, params.p_bar
    mb, mbb = params.mu_b, params.mu_b_bar
    mv, mvb = params.mu_v, params.mu_v_bar
    theta, tb = params.theta, params.theta_bar

    stay = 1.0 - tb * mvb
    level_out = theta + tb * p * mvb + tb * pb * mv
    k0 = stay * level_out - p * tb * tb * mv * mvb

    def lower_row(x: float) -> float:
        return (theta + tb * p * mvb) * x - tb * pb * mv * x * x

    def upper_row(x: float) -> float:
        return k0 * x**n0 - p * tb * mvb * stay * x ** (n0 - 1)

    pi11 = 1.0
    rhs = pb * tb * mb * pi11
    h = 1.0 / _guard(
        lower_row(x2) * upper_row(x1) - lower_row(x1) * upper_row(x2),
        "coefficient determinant",
    )
    a1t = -h * rhs * upper_row(x2)
    b1t = h * rhs * upper_row(x1)

    vac = [0.0] + [a1t * x1**n + b1t * x2**n for n in range(1, n0 + 1)]
    pi00 = (pb * mv * vac[1] + pb * mb * pi11) / p
    vac_top = p * tb * mvb / stay * vac[n0]

    def particular(x: float, coef: float) -> float:
        den = _guard((x - 1.0) * (p * mbb - pb * mb * x), "particular denominator")
        return theta * coef * ((x - 1.0) * (pb * mv * x - p * mvb) + x) / den

    c1t = particular(x1, a1t)
    d1t = particular(x2, b1t)
    s1 = pi11 - c1t * x1 - d1t * x2
    s2 = (
        (p * mbb + pb * mb * tb) * pi11
        - theta * (1.0 - p * mvb) * vac[1]
        - theta * pb * mv * vac[2]
    ) / (pb * mb) - (c1t * x1 * x1 + d1t * x2 * x2)
    b2t = (s1 - s2) / _guard(alpha * (1.0 - alpha), "alpha(1 - alpha)")
    a2t = s1 - alpha * b2t

    busy = [0.0] + [
        a2t + b2t * alpha**n + c1t * x1**n + d1t * x2**n for n in range(1, n0 + 1)
    ]
    first_upper = alpha * busy[n0] + p * theta * mvb / (pb * mb * stay) * vac[n0]
    b3t = first_upper * alpha ** (-1 - n0)
    busy += [first_upper * alpha ** (n - n0 - 1) for n in range(n0 + 1, n1 + 1)]
    busy.append(pb * alpha * busy[n1])

    raw: dict[SystemState, float] = {SystemState(0, VACATION): pi00}
    for n in range(1, n0 + 1):
        raw[SystemState(n, VACATION)] = vac[n]
    raw[SystemState(n0 + 1, VACATION)] = vac_top
    for n in range(1, n1 + 2):
        raw[SystemState(n, BUSY)] = busy[n]

    total = math.fsum(raw.values())
    probabilities = {state: mass / total for state, mass in raw.items()}
    lowest = min(probabilities.values())
    if lowest < -1e-12:
        raise NumericalInstability(f"closed form produced negative mass {lowest:.3e}")
    probabilities = {state: max(mass, 0.0) for state, mass in probabilities.items()}

    coefficients = ObservableCoefficients(
        a1t=a1t / total,
        b1t=b1t / total,
        c1t=c1t / total,
        d1t=d1t / total,
        a2t=a2t / total,
        b2t=b2t / total,
        b3t=b3t / total,
        pi11=pi11 / total,
        h=h,
    )
    return ObservableStationary(
        probabilities=probabilities,
        method=DistributionMethod.CLOSED_FORM,
        coefficients=coefficients,
    )


def transition_matrix(params: QueueParams, thresholds: ThresholdPair) -> ChainMatrix:
    return build_chain(params, thresholds.join_probability)


def linear_solve_distribution(chain: ChainMatrix) -> ObservableStationary:
    pi = stationary_vector(chain.matrix)
    return ObservableStationary(
        probabilities={s: float(m) for s, m in zip(chain.states, pi, strict=True)},
        method=DistributionMethod.LINEAR_SOLVE,
    )


def stationary_distribution(
    params: QueueParams, thresholds: ThresholdPair
) -> ObservableStationary:
    try:
        return closed_form_distribution(params, thresholds)
    except (NumericalInstability, UnsupportedThresholdShape, Unstable) as exc:
        logger.debug("closed form unavailable for %s: %s", thresholds, exc)
    return linear_solve_distribution(transition_matrix(params, thresholds))


def balance_residuals(
    params: QueueParams, thresholds: ThresholdPair, dist: ObservableStationary
) -> dict[SystemState, float]:
    """Inflow minus mass for every state, written out from the transition blocks.

    Covers the closed-form shape n0 >= 2, n1 >= n0 + 2.
    """

    n0, n1 = thresholds.n0, thresholds.n1
    if n0 < 2 or n1 < n0 + 2:
        raise UnsupportedThresholdShape(f"no balance layout for ({n0}, {n1})")

    p, pb = params.p, params.p_bar
    mb, mbb = params.mu_b, params.mu_b_bar
    mv, mvb = params.mu_v, params.mu_v_bar
    theta, tb = params.theta, params.theta_bar

    def v(n: int) -> float:
        return dist.probability(SystemState(n, VACATION))

    def w(n: int) -> float:
        return dist.probability(SystemState(n, BUSY)) if n >= 1 else 0.0

    vac_hold = 1.0 - p * mvb - pb * mv
    busy_hold = 1.0 - p * mbb - pb * mb

    def vac_down(n: int) -> float:
        # From (n, 0) to level n - 1; arrivals balk at n0 + 1.
        return mv if n == n0 + 1 else pb * mv

    def busy_down(n: int) -> float:
        return mb if n == n1 + 1 else pb * mb

    res: dict[SystemState, float] = {}
    res[SystemState(0, VACATION)] = pb * v(0) + pb * mv * v(1) + pb * mb * w(1) - v(0)
    res[SystemState(1, VACATION)] = (
        p * tb * v(0) + tb * vac_hold * v(1) + tb * vac_down(2) * v(2) - v(1)
    )
    res[SystemState(1, BUSY)] = (
        p * theta * v(0)
        + theta * vac_hold * v(1)
        + busy_hold * w(1)
        + theta * vac_down(2) * v(2)
        + busy_down(2) * w(2)
        - w(1)
    )
    for n in range(2, n0 + 1):
        res[SystemState(n, VACATION)] = (
            p * tb * mvb * v(n - 1)
            + tb * vac_hold * v(n)
            + tb * vac_down(n + 1) * v(n + 1)
            - v(n)
        )
        res[SystemState(n, BUSY)] = (
            p * theta * mvb * v(n - 1)
            + p * mbb * w(n - 1)
            + theta * vac_hold * v(n)
            + busy_hold * w(n)
            + theta * vac_down(n + 1) * v(n + 1)
            + busy_down(n + 1) * w(n + 1)
            - w(n)
        )
    top = n0 + 1
    res[SystemState(top, VACATION)] = p * tb * mvb * v(n0) + tb * mvb * v(top) - v(top)
    res[SystemState(top, BUSY)] = (
        p * theta * mvb * v(n0)
        + p * mbb * w(n0)
        + theta * mvb * v(top)
        + busy_hold * w(top)
        + busy_down(top + 1) * w(top + 1)
        - w(top)
    )
    for n in range(n0 + 2, n1 + 1):
        res[SystemState(n, BUSY)] = (
            p * mbb * w(n - 1) + busy_hold * w(n) + busy_down(n + 1) * w(n + 1) - w(n)
        )
    res[SystemState(n1 + 1, BUSY)] = p * mbb * w(n1) + mbb * w(n1 + 1) - w(n1 + 1)
    return res


# ----------------------------------------------------------------------------
# Social benefit
# ----------------------------------------------------------------------------


def mean_queue_length(dist: ObservableStationary) -> float:
    return dist.mean_count()


def join_rate(
    params: QueueParams, thresholds: ThresholdPair, dist: ObservableStationary
) -> float:
    return params.p * math.fsum(
        mass * thresholds.join_probability(s.count, s.phase)
        for s, mass in dist.probabilities.items()
    )


def social_benefit(
    params: QueueParams,
    econ: EconParams,
    thresholds: ThresholdPair,
    dist: ObservableStationary | None = None,
) -> float:
    """Reward of joining customers minus waiting cost, per slot."""

    if dist is None:
        dist = stationary_distribution(params, thresholds)
    return econ.reward * join_rate(params, thresholds, dist) - econ.cost * (
        dist.mean_count()
    )


def socially_optimal_thresholds(
    params: QueueParams,
    econ: EconParams,
    cap: int | ThresholdPair | None = None,
) -> ThresholdPair:
    """Exhaustive search of [−1, cap0] × [−1, cap1]; ties go to the smallest pair."""

    eq = equilibrium_thresholds(params, econ)
    if cap is None:
        cap0, cap1 = eq.n0 + 5, eq.n1 + 5
    elif isinstance(cap, ThresholdPair):
        cap0, cap1 = cap.n0, cap.n1
    else:
        cap0 = cap1 = cap
    if cap0 < eq.n0 or cap1 < eq.n1:
        raise InvalidParameter("cap", cap, f"must contain the equilibrium {eq}")

    best: ThresholdPair | None = None
    best_value = -math.inf
    for n0 in range(-1, cap0 + 1):
        for n1 in range(-1, cap1 + 1):
            candidate = ThresholdPair(n0, n1)
            value = social_benefit(params, econ, candidate)
            if value > best_value:
                best, best_value = candidate, value
    assert best is not None
    return best
