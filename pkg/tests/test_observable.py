from __future__ import annotations

from collections.abc import Iterator

import numpy as np
import pytest

from wvq.analysis import observable
from wvq.analysis.observable import DistributionMethod
from wvq.errors import DegenerateRoots, InvalidParameter, UnsupportedThresholdShape
from wvq.model import (
    EconParams,
    QueueParams,
    ServerPhase,
    SystemState,
    busy_traffic_ratio,
)
from wvq.strategy import ThresholdPair

PARAMS = QueueParams(p=0.5, mu_b=0.8, mu_v=0.4, theta=0.2)
ECON = EconParams(reward=10.0, cost=1.0)


def _derivative_at_one(pgf, h: float = 1e-6) -> float:
    return (pgf(1.0 + h) - pgf(1.0 - h)) / (2.0 * h)


def test_busy_pgf_is_deterministic_for_certain_service() -> None:
    params = PARAMS.with_values(mu_b=1.0)
    assert observable.sojourn_pgf_busy(1, params, 0.5) == pytest.approx(0.5)


def test_busy_pgf_matches_truncated_series() -> None:
    # A Geometric(mu_b) wait on 0, 1, ... then n services on 1, 2, ...
    params = PARAMS.with_values(mu_b=0.5)
    mu, n, z = 0.5, 2, 0.5
    first = np.array([mu * (1.0 - mu) ** k for k in range(200)])
    service = np.concatenate([[0.0], first])
    total = first.copy()
    for _ in range(n):
        total = np.convolve(total, service)[:400]
    series = sum(mass * z**k for k, mass in enumerate(total))
    assert observable.sojourn_pgf_busy(n, params, z) == pytest.approx(series, rel=1e-12)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_busy_pgf_normalization_and_mean(n: int) -> None:
    assert observable.sojourn_pgf_busy(n, PARAMS, 1.0) == pytest.approx(1.0)
    slope = _derivative_at_one(lambda z: observable.sojourn_pgf_busy(n, PARAMS, z))
    assert slope == pytest.approx(observable.mean_sojourn_busy(n, PARAMS), rel=1e-5)


def test_busy_mean_is_slot_exact() -> None:
    for n in range(1, 6):
        state = SystemState(n, ServerPhase.BUSY)
        assert observable.mean_sojourn_busy(n, PARAMS) == pytest.approx(
            observable.exact_mean_sojourn(state, PARAMS)
        )


@pytest.mark.parametrize("n", [0, 2, 5])
def test_vacation_pgf_normalization_and_mean(n: int) -> None:
    assert observable.sojourn_pgf_vacation(n, PARAMS, 1.0) == pytest.approx(1.0)
    slope = _derivative_at_one(
        lambda z: observable.sojourn_pgf_vacation(n, PARAMS, z)
    )
    assert slope == pytest.approx(
        observable.mean_sojourn_vacation(n, PARAMS), rel=1e-5
    )


def test_vacation_pgf_closed_form_matches_double_sum() -> None:
    for n in range(0, 6):
        for z in (0.2, 0.7, 0.95):
            assert observable.sojourn_pgf_vacation(n, PARAMS, z) == pytest.approx(
                observable.vacation_pgf_double_sum(n, PARAMS, z), rel=1e-12
            )


def test_vacation_mean_exceeds_exact_by_one_vacation_start_service() -> None:
    kernels_mean = _derivative_at_one(
        lambda z: observable.VacationKernels.at(PARAMS, z).own_service
    )
    for n in range(1, 6):
        exact = observable.exact_mean_sojourn(
            SystemState(n, ServerPhase.VACATION), PARAMS
        )
        closed_form = observable.mean_sojourn_vacation(n, PARAMS)
        assert closed_form - exact == pytest.approx(kernels_mean, rel=1e-5)


def test_negative_z_is_rejected() -> None:
    with pytest.raises(InvalidParameter):
        observable.sojourn_pgf_busy(1, PARAMS, -0.1)
    with pytest.raises(InvalidParameter):
        observable.mean_sojourn_busy(0, PARAMS)


@pytest.mark.parametrize(
    "mu_b, expected",
    [(0.5, (2, 4)), (0.6, (3, 5)), (0.7, (3, 6)), (0.8, (4, 7)), (0.9, (4, 8))],
)
def test_equilibrium_thresholds_on_figure_one_sweep(
    mu_b: float, expected: tuple[int, int]
) -> None:
    params = PARAMS.with_values(mu_b=mu_b)
    eq = observable.equilibrium_thresholds(params, ECON)
    assert (eq.n0, eq.n1) == expected
    assert observable.equilibrium_thresholds_continuous(params, ECON) == eq


def test_equilibrium_is_a_best_response() -> None:
    eq = observable.equilibrium_thresholds(PARAMS, ECON)
    assert observable.net_benefit(ServerPhase.VACATION, eq.n0, PARAMS, ECON) >= 0.0
    assert observable.net_benefit(ServerPhase.VACATION, eq.n0 + 1, PARAMS, ECON) < 0.0
    assert observable.net_benefit(ServerPhase.BUSY, eq.n1, PARAMS, ECON) >= 0.0
    assert observable.net_benefit(ServerPhase.BUSY, eq.n1 + 1, PARAMS, ECON) < 0.0


def test_balking_everywhere_when_reward_is_tiny() -> None:
    eq = observable.equilibrium_thresholds(PARAMS, EconParams(reward=0.1, cost=1.0))
    assert eq == ThresholdPair(-1, -1)


def test_large_reward_thresholds_are_best_responses() -> None:
    econ = EconParams(reward=5e6, cost=1.0)
    eq = observable.equilibrium_thresholds(PARAMS, econ)
    assert eq.n1 > 3_000_000
    for phase, n in ((ServerPhase.VACATION, eq.n0), (ServerPhase.BUSY, eq.n1)):
        assert observable.net_benefit(phase, n, PARAMS, econ) >= 0.0
        assert observable.net_benefit(phase, n + 1, PARAMS, econ) < 0.0
    assert observable.equilibrium_thresholds_continuous(PARAMS, econ) == eq


def test_vacation_threshold_when_vacation_service_is_faster() -> None:
    params = QueueParams(p=0.5, mu_b=0.3, mu_v=0.9, theta=0.05)
    econ = EconParams(reward=20.0, cost=1.0)
    eq = observable.equilibrium_thresholds(params, econ)
    benefits = [
        observable.net_benefit(ServerPhase.VACATION, n, params, econ)
        for n in range(eq.n0 + 20)
    ]
    assert all(b >= 0.0 for b in benefits[: eq.n0 + 1])
    assert all(b < 0.0 for b in benefits[eq.n0 + 1 :])


def _random_instances(
    count: int, seed: int = 7
) -> Iterator[tuple[QueueParams, ThresholdPair]]:
    rng = np.random.default_rng(seed)
    found = 0
    while found < count:
        p, mu_b, mu_v, theta = rng.uniform(0.05, 0.95, size=4)
        if busy_traffic_ratio(p, mu_b) >= 0.95:
            continue
        params = QueueParams(
            p=float(p), mu_b=float(mu_b), mu_v=float(mu_v), theta=float(theta)
        )
        try:
            roots = observable.characteristic_roots(params)
        except DegenerateRoots:
            continue
        if abs(roots.x1 - roots.x2) <= 1e-6:
            continue
        n0 = int(rng.integers(2, 7))
        n1 = n0 + int(rng.integers(2, 7))
        found += 1
        yield params, ThresholdPair(n0, n1)


def test_closed_form_matches_linear_solve_on_random_instances() -> None:
    for params, thresholds in _random_instances(200):
        closed = observable.closed_form_distribution(params, thresholds)
        chain = observable.transition_matrix(params, thresholds)
        solved = observable.linear_solve_distribution(chain)
        assert set(closed.probabilities) == set(chain.states)
        gap = np.abs(closed.as_vector(chain.states) - solved.as_vector(chain.states))
        assert gap.max() <= 1e-9, (params, thresholds)


def test_closed_form_satisfies_balance_equations() -> None:
    thresholds = ThresholdPair(3, 7)
    dist = observable.closed_form_distribution(PARAMS, thresholds)
    residuals = observable.balance_residuals(PARAMS, thresholds, dist)
    assert max(abs(v) for v in residuals.values()) < 1e-12
    assert dist.total() == pytest.approx(1.0, abs=1e-12)


def test_balance_equations_hold_on_random_instances() -> None:
    for params, thresholds in _random_instances(200):
        dist = observable.closed_form_distribution(params, thresholds)
        residuals = observable.balance_residuals(params, thresholds, dist)
        assert max(abs(v) for v in residuals.values()) <= 1e-10, (params, thresholds)


def test_closed_form_rejects_unsupported_shapes() -> None:
    with pytest.raises(UnsupportedThresholdShape):
        observable.closed_form_distribution(PARAMS, ThresholdPair(1, 5))
    with pytest.raises(UnsupportedThresholdShape):
        observable.closed_form_distribution(PARAMS, ThresholdPair(3, 4))


def test_stationary_distribution_falls_back_to_linear_solve() -> None:
    dist = observable.stationary_distribution(PARAMS, ThresholdPair(1, 2))
    assert dist.method is DistributionMethod.LINEAR_SOLVE
    assert dist.total() == pytest.approx(1.0)
    dist = observable.stationary_distribution(PARAMS, ThresholdPair(4, 7))
    assert dist.method is DistributionMethod.CLOSED_FORM


def test_social_benefit_agrees_between_methods() -> None:
    thresholds = ThresholdPair(4, 7)
    closed = observable.closed_form_distribution(PARAMS, thresholds)
    solved = observable.linear_solve_distribution(
        observable.transition_matrix(PARAMS, thresholds)
    )
    assert observable.social_benefit(
        PARAMS, ECON, thresholds, closed
    ) == pytest.approx(
        observable.social_benefit(PARAMS, ECON, thresholds, solved), abs=1e-8
    )


def test_social_optimum_is_no_worse_than_equilibrium() -> None:
    eq = observable.equilibrium_thresholds(PARAMS, ECON)
    best = observable.socially_optimal_thresholds(PARAMS, ECON)
    assert best.n0 <= eq.n0 and best.n1 <= eq.n1
    assert observable.social_benefit(PARAMS, ECON, best) >= observable.social_benefit(
        PARAMS, ECON, eq
    )


def test_social_optimum_cap_must_contain_equilibrium() -> None:
    with pytest.raises(InvalidParameter):
        observable.socially_optimal_thresholds(PARAMS, ECON, cap=2)
