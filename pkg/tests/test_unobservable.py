from __future__ import annotations

import numpy as np
import pytest

from wvq.analysis import partial, unobservable
from wvq.errors import DivisionHazard, InvalidParameter, Unstable
from wvq.model import EconParams, QueueParams, busy_traffic_ratio, is_unstable
from wvq.strategy import MixedPair

FIG11 = QueueParams(p=0.5, mu_b=0.9, mu_v=0.5, theta=0.3)
FIG11_ECON = EconParams(reward=4.5, cost=1.0)
# Light traffic with near-instant vacation service: r' underflows for tiny q.
SPARSE = QueueParams(p=0.001, mu_b=0.5, mu_v=0.999, theta=0.99)


def test_vacation_ratio_is_shared_with_partial_observation() -> None:
    for q in (0.2, 0.6, 1.0):
        derived = unobservable.derived_quantities(FIG11, q)
        rate = partial.minimal_rate_matrix(FIG11, MixedPair(q, q))
        assert derived.r_p == pytest.approx(rate.r, rel=1e-14)
        assert derived.alpha_p == pytest.approx(rate.alpha_t, rel=1e-14)


def test_sigma_definition() -> None:
    d = unobservable.derived_quantities(FIG11, 0.8)
    lam = FIG11.p * 0.8
    assert d.sigma == pytest.approx(d.r_p / (lam + d.r_p * (1.0 - lam)))
    assert 0.0 < d.sigma < 1.0


def test_sigma_complement_identities() -> None:
    for p in (0.1, 0.5, 0.85):
        params = FIG11.with_values(p=p)
        for q in np.linspace(0.05, 1.0, 20):
            d = unobservable.derived_quantities(params, float(q))
            lam = p * float(q)
            complement = lam * (1.0 - d.r_p) / (lam + d.r_p * (1.0 - lam))
            assert 1.0 - d.sigma == pytest.approx(complement, abs=1e-14)
            odds = d.r_p / (lam * (1.0 - d.r_p))
            assert d.sigma / (1.0 - d.sigma) == pytest.approx(odds, rel=1e-12)


def test_no_vacation_slowdown_reduces_to_classical_queue() -> None:
    params = QueueParams(p=0.4, mu_b=0.7, mu_v=0.7, theta=0.3)
    d = unobservable.derived_quantities(params, 1.0)
    assert d.delta2 == 0.0
    assert unobservable.mean_sojourn(params, 1.0) == pytest.approx(2.0)
    assert unobservable.exact_mean_sojourn(params, 1.0) == pytest.approx(
        2.0, rel=1e-9
    )


def test_zero_traffic_has_no_decomposition() -> None:
    with pytest.raises(InvalidParameter):
        unobservable.derived_quantities(FIG11, 0.0)
    with pytest.raises(InvalidParameter):
        unobservable.mean_sojourn(FIG11, 1.5)


def test_tiny_ratio_is_guarded() -> None:
    with pytest.raises(DivisionHazard):
        unobservable.derived_quantities(SPARSE, 1e-9)
    limit = unobservable.zero_traffic_mean_sojourn(SPARSE)
    assert unobservable.mean_sojourn(SPARSE, 1e-9) == limit
    assert unobservable.mean_sojourn(SPARSE, 0.0) == limit


def test_light_traffic_strategies_do_not_fail() -> None:
    econ = EconParams(reward=1.0, cost=1.0)
    assert unobservable.equilibrium_join_probability(SPARSE, econ) == 0.0
    assert unobservable.socially_optimal_join_probability(SPARSE, econ) == 0.0
    rich = EconParams(reward=3.0, cost=1.0)
    assert unobservable.equilibrium_join_probability(SPARSE, rich) == 1.0


def test_zero_traffic_limit_is_continuous() -> None:
    limit = unobservable.zero_traffic_mean_sojourn(FIG11)
    assert unobservable.mean_sojourn(FIG11, 1e-6) == pytest.approx(limit, rel=1e-4)
    assert unobservable.net_benefit(FIG11, FIG11_ECON, 0.0) == pytest.approx(
        FIG11_ECON.reward - FIG11_ECON.cost * limit
    )
    own_service = partial.conditional_mean_sojourn_vacation(FIG11, MixedPair(0.0, 0.0))
    assert limit == pytest.approx(own_service, rel=1e-12)


def test_mean_sojourn_is_nondecreasing_in_join_probability() -> None:
    for params in (
        FIG11,
        FIG11.with_values(p=0.8),
        QueueParams(p=0.6, mu_b=0.7, mu_v=0.2, theta=0.1),
    ):
        values = []
        for q in np.linspace(0.0, 1.0, 201):
            if is_unstable(busy_traffic_ratio(params.p * float(q), params.mu_b)):
                break
            values.append(unobservable.mean_sojourn(params, float(q)))
        assert len(values) > 100
        assert all(
            b >= a - 1e-12 * a for a, b in zip(values, values[1:], strict=False)
        )


def test_unstable_join_probability_is_rejected() -> None:
    params = QueueParams(p=0.6, mu_b=0.5, mu_v=0.4, theta=0.3)
    with pytest.raises(Unstable):
        unobservable.mean_sojourn(params, 1.0)


def test_equilibrium_is_indifferent_or_at_a_boundary() -> None:
    for p in (0.3, 0.6, 0.85):
        params = FIG11.with_values(p=p)
        q_e = unobservable.equilibrium_join_probability(params, FIG11_ECON)
        benefit = unobservable.net_benefit(params, FIG11_ECON, q_e)
        if q_e == 1.0:
            assert benefit >= 0.0
        elif q_e == 0.0:
            assert benefit <= 0.0
        else:
            assert benefit == pytest.approx(0.0, abs=1e-7)


def test_everyone_balks_when_reward_is_below_one_service() -> None:
    econ = EconParams(reward=0.5, cost=1.0)
    assert unobservable.equilibrium_join_probability(FIG11, econ) == 0.0
    assert unobservable.socially_optimal_join_probability(FIG11, econ) == 0.0


def test_social_benefit_is_join_rate_times_net_benefit() -> None:
    q = 0.45
    expected = FIG11.p * q * unobservable.net_benefit(FIG11, FIG11_ECON, q)
    assert unobservable.social_benefit(FIG11, FIG11_ECON, q) == pytest.approx(expected)
    assert unobservable.social_benefit(FIG11, FIG11_ECON, 0.0) == 0.0


def test_social_optimum_is_a_local_maximum_below_equilibrium() -> None:
    params = FIG11.with_values(p=0.8)
    q_star = unobservable.socially_optimal_join_probability(params, FIG11_ECON)
    q_e = unobservable.equilibrium_join_probability(params, FIG11_ECON)
    value = unobservable.social_benefit(params, FIG11_ECON, q_star)
    for nearby in (q_star - 0.001, q_star + 0.001):
        if 0.0 <= nearby <= 1.0:
            assert (
                unobservable.social_benefit(params, FIG11_ECON, nearby)
                <= value + 1e-12
            )
    assert q_star <= q_e + 1e-9
    equilibrium_value = unobservable.social_benefit(params, FIG11_ECON, q_e)
    assert value >= equilibrium_value - 1e-9


def test_exact_social_benefit_uses_the_truncated_chain() -> None:
    params = QueueParams(p=0.4, mu_b=0.7, mu_v=0.7, theta=0.3)
    exact = unobservable.exact_social_benefit(params, FIG11_ECON, 1.0)
    # Little's law: joins 0.4 per slot, each staying two slots.
    assert exact == pytest.approx(0.4 * 4.5 - 0.8, rel=1e-9)
    assert unobservable.exact_social_benefit(params, FIG11_ECON, 0.0) == 0.0


def test_regime_mixture_is_between_phase_means() -> None:
    q = 0.6
    mixture = unobservable.regime_mixture_mean_sojourn(FIG11, q)
    pair = MixedPair(q, q)
    low, high = sorted(
        (
            partial.conditional_mean_sojourn_vacation(FIG11, pair),
            partial.conditional_mean_sojourn_busy(FIG11, pair),
        )
    )
    assert low <= mixture <= high
