from __future__ import annotations

import numpy as np
import pytest

from wvq.engine.chain import (
    build_chain,
    joined_mean_sojourn,
    slot_transitions,
    solve_chain,
    stationary_vector,
    tagged_mean_sojourn,
    vacation_remaining_means,
)
from wvq.errors import SingularSystem
from wvq.model import QueueParams, ServerPhase, SystemState
from wvq.strategy import BlindJoin, ThresholdPair

PARAMS = QueueParams(p=0.5, mu_b=0.8, mu_v=0.4, theta=0.2)


def test_stationary_vector_of_symmetric_two_state_chain() -> None:
    pi = stationary_vector(np.array([[0.5, 0.5], [0.5, 0.5]]))
    assert pi == pytest.approx([0.5, 0.5])


def test_stationary_vector_rejects_reducible_chain() -> None:
    with pytest.raises(SingularSystem):
        stationary_vector(np.eye(2))


def test_slot_transitions_from_empty_system() -> None:
    out = slot_transitions(PARAMS, 0, int(ServerPhase.VACATION), 1.0)
    # The arrival is never served in its own slot.
    assert out[(1, 1)] == pytest.approx(0.5 * 0.2)
    assert out[(1, 0)] == pytest.approx(0.5 * 0.8)
    assert out[(0, 0)] == pytest.approx(0.5)
    assert sum(out.values()) == pytest.approx(1.0)


def test_threshold_chain_rows_are_stochastic() -> None:
    chain = build_chain(PARAMS, ThresholdPair(2, 5).join_probability)
    assert chain.matrix.sum(axis=1) == pytest.approx(np.ones(len(chain)))
    assert max(s.count for s in chain.states) == 6
    assert SystemState(3, ServerPhase.VACATION) in chain.states
    assert SystemState(4, ServerPhase.VACATION) not in chain.states


def test_truncated_chain_reflects_at_top_level() -> None:
    solution = solve_chain(PARAMS, BlindJoin(1.0).join_probability, max_level=8)
    assert max(s.count for s in solution.chain.states) == 8
    assert solution.pi.sum() == pytest.approx(1.0)
    # Nobody joins at the reflecting level.
    assert solution.join_rate(PARAMS) < PARAMS.p


def test_busy_tagged_mean_matches_geometric_services() -> None:
    state = SystemState(1, ServerPhase.BUSY)
    params = PARAMS.with_values(mu_b=0.5)
    assert tagged_mean_sojourn(params, state) == pytest.approx(3.0)


def test_vacation_means_collapse_to_busy_means_without_slowdown() -> None:
    params = PARAMS.with_values(mu_v=0.8)
    means = vacation_remaining_means(params, 6)
    assert means == pytest.approx(np.arange(7) / 0.8)
    for n in range(1, 6):
        vacation = tagged_mean_sojourn(params, SystemState(n, ServerPhase.VACATION))
        busy = tagged_mean_sojourn(params, SystemState(n, ServerPhase.BUSY))
        assert vacation == pytest.approx(busy)


def test_joined_mean_sojourn_obeys_littles_law() -> None:
    rule = ThresholdPair(3, 6).join_probability
    solution = solve_chain(PARAMS, rule)
    overall = joined_mean_sojourn(PARAMS, solution.chain, solution.pi, rule)
    assert overall == pytest.approx(
        solution.mean_count() / solution.join_rate(PARAMS), rel=1e-10
    )
