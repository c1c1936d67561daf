"""CSV output and the analytic-versus-simulation report."""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import TextIO

from wvq.analysis import observable, partial, unobservable
from wvq.engine.chain import ChainSolution, joined_mean_sojourn, solve_chain
from wvq.model import EconParams, QueueParams, ServerPhase, SystemState
from wvq.sim.checks import Estimate, transition_frequency_check
from wvq.sim.simulator import SimResult, state_stderr
from wvq.strategy import BlindJoin, MixedPair, Strategy, ThresholdPair

logger = logging.getLogger(__name__)

STATE_BANDS = 5.0
SCALAR_BANDS = 4.0
# States below this mass are reported only when the simulation visited them.
REPORT_MASS = 1e-6

VALIDATION_HEADER = (
    "metric",
    "analytic",
    "empirical",
    "stderr",
    "z",
    "gated",
    "status",
)


def format_value(value: object) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.12g}"
    return str(value)


def write_csv(
    stream: TextIO, header: Sequence[str], rows: Iterable[Sequence[object]]
) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def write_pairs(stream: TextIO, pairs: Iterable[tuple[str, object]]) -> None:
    for key, value in pairs:
        stream.write(f"{key}={format_value(value)}\n")


# ----------------------------------------------------------------------------
# analyze
# ----------------------------------------------------------------------------


def analyze_pairs(
    case: str, params: QueueParams, econ: EconParams
) -> list[tuple[str, object]]:
    pairs: list[tuple[str, object]] = [("case", case)]
    if case == "observable":
        eq = observable.equilibrium_thresholds(params, econ)
        best = observable.socially_optimal_thresholds(params, econ)
        dist = observable.stationary_distribution(params, eq)
        vacation = math.fsum(
            m for s, m in dist.probabilities.items() if s.phase is ServerPhase.VACATION
        )
        pairs += [
            ("n_e(0)", eq.n0),
            ("n_e(1)", eq.n1),
            ("n_star(0)", best.n0),
            ("n_star(1)", best.n1),
            ("U_s(equilibrium)", observable.social_benefit(params, econ, eq, dist)),
            ("U_s(optimal)", observable.social_benefit(params, econ, best)),
            ("distribution_method", dist.method.value),
            ("P(J=0)", vacation),
            ("P(J=1)", 1.0 - vacation),
            ("E[L]", observable.mean_queue_length(dist)),
        ]
    elif case == "partial":
        eq_pair = partial.equilibrium_mixed(params, econ)
        best_pair = partial.socially_optimal_mixed(params, econ)
        dist = partial.stationary_distribution(params, eq_pair)
        prob_vacation, prob_busy = partial.regime_probabilities(dist)
        pairs += [
            ("q_e(0)", eq_pair.q0),
            ("q_e(1)", eq_pair.q1),
            ("q_star(0)", best_pair.q0),
            ("q_star(1)", best_pair.q1),
            ("U_s(equilibrium)", partial.social_benefit(params, econ, eq_pair)),
            ("U_s(optimal)", partial.social_benefit(params, econ, best_pair)),
            ("P(J=0)", prob_vacation),
            ("P(J=1)", prob_busy),
            ("E[L]", partial.mean_queue_length(dist)),
        ]
    else:
        q_e = unobservable.equilibrium_join_probability(params, econ)
        q_star = unobservable.socially_optimal_join_probability(params, econ)
        pairs += [
            ("q_e", q_e),
            ("q_star", q_star),
            ("U_s(equilibrium)", unobservable.social_benefit(params, econ, q_e)),
            ("U_s(optimal)", unobservable.social_benefit(params, econ, q_star)),
        ]
    return pairs


# ----------------------------------------------------------------------------
# validate
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    metric: str
    analytic: float
    empirical: float
    stderr: float
    bands: float | None

    @property
    def gated(self) -> bool:
        return self.bands is not None

    @property
    def z(self) -> float:
        return Estimate(self.empirical, self.stderr, 0).z_score(self.analytic)

    @property
    def passed(self) -> bool:
        if self.bands is None:
            return True
        return abs(self.z) <= self.bands

    @property
    def status(self) -> str:
        if not self.gated:
            return "info"
        return "ok" if self.passed else "FAIL"

    def row(self) -> list[object]:
        return [
            self.metric,
            self.analytic,
            self.empirical,
            self.stderr,
            self.z,
            self.gated,
            self.status,
        ]


def default_strategy(case: str, params: QueueParams, econ: EconParams) -> Strategy:
    if case == "observable":
        return observable.equilibrium_thresholds(params, econ)
    if case == "partial":
        return partial.equilibrium_mixed(params, econ)
    return BlindJoin(unobservable.equilibrium_join_probability(params, econ))


def exact_solution(params: QueueParams, strategy: Strategy) -> ChainSolution:
    """The finite chain the simulator runs on, truncated for the infinite cases."""

    if isinstance(strategy, ThresholdPair):
        return solve_chain(params, strategy.join_probability)
    if isinstance(strategy, MixedPair):
        return partial.truncated_chain_oracle(params, strategy)
    return partial.truncated_chain_oracle(params, MixedPair(strategy.q, strategy.q))


def _state_masses(
    params: QueueParams, strategy: Strategy, solution: ChainSolution
) -> dict[SystemState, float]:
    if isinstance(strategy, ThresholdPair):
        return dict(observable.stationary_distribution(params, strategy).probabilities)
    if isinstance(strategy, MixedPair):
        dist = partial.stationary_distribution(params, strategy)
        return {s: dist.probability(s) for s in solution.chain.states}
    return solution.as_dict()


def _estimate_row(
    metric: str, analytic: float, estimate: Estimate, bands: float | None
) -> Comparison | None:
    if estimate.count == 0:
        return None
    return Comparison(metric, analytic, estimate.mean, estimate.stderr, bands)


def compare(
    params: QueueParams,
    econ: EconParams,
    strategy: Strategy,
    result: SimResult,
    samples: int,
) -> list[Comparison]:
    """Every analytic-versus-empirical comparison for one simulation run."""

    solution = exact_solution(params, strategy)
    chain, pi = solution.chain, solution.pi
    rows: list[Comparison] = []

    masses = _state_masses(params, strategy, solution)
    for state in sorted(set(masses) | set(result.empirical_dist)):
        analytic = masses.get(state, 0.0)
        empirical = result.empirical_dist.get(state, 0.0)
        if analytic < REPORT_MASS and empirical == 0.0:
            continue
        floor = math.sqrt(max(analytic * (1.0 - analytic), 0.0) / samples)
        stderr = max(state_stderr(result, state, samples), floor)
        rows.append(
            Comparison(f"pi{state.label()}", analytic, empirical, stderr, STATE_BANDS)
        )

    mean_count = solution.mean_count()
    joins = solution.join_rate(params)
    optional = [
        _estimate_row("E[L]", mean_count, result.mean_queue_length, SCALAR_BANDS),
        _estimate_row(
            "E[W]",
            mean_count / joins if joins > 0 else math.nan,
            result.mean_sojourn_overall,
            SCALAR_BANDS,
        ),
        _estimate_row(
            "balk_rate", 1.0 - joins / params.p, result.balk_rate, SCALAR_BANDS
        ),
    ]
    for phase in ServerPhase:
        optional.append(
            _estimate_row(
                f"E[W|J={int(phase)}]",
                joined_mean_sojourn(params, chain, pi, solution.join_rule, phase),
                result.mean_sojourn_by_join_phase[phase],
                SCALAR_BANDS,
            )
        )
    if result.social_benefit_rate is not None:
        optional.append(
            _estimate_row(
                "U_s",
                econ.reward * joins - econ.cost * mean_count,
                result.social_benefit_rate,
                SCALAR_BANDS,
            )
        )
    optional += _closed_form_rows(params, econ, strategy, result, solution)
    rows += [row for row in optional if row is not None]

    report = transition_frequency_check(result.transition_counts, chain)
    for violation in report.violations:
        logger.warning("transition frequency violation %s", violation.describe())
    rows.append(
        Comparison(
            "transition_violations",
            0.0,
            float(len(report.violations)),
            math.nan,
            0.0,
        )
    )
    return rows


def _closed_form_rows(
    params: QueueParams,
    econ: EconParams,
    strategy: Strategy,
    result: SimResult,
    solution: ChainSolution,
) -> list[Comparison | None]:
    by_phase = result.mean_sojourn_by_join_phase
    vacation, busy = by_phase[ServerPhase.VACATION], by_phase[ServerPhase.BUSY]
    if isinstance(strategy, ThresholdPair):
        return [
            _estimate_row(
                "closed-form E[W|J=0]",
                _closed_form_vacation_mixture(params, strategy, solution),
                vacation,
                None,
            )
        ]
    if isinstance(strategy, MixedPair):
        rows = [
            _estimate_row(
                "closed-form E[W|J=0]",
                partial.conditional_mean_sojourn_vacation(params, strategy),
                vacation,
                SCALAR_BANDS,
            )
        ]
        if strategy.q0 > 0.0:
            rows.append(
                _estimate_row(
                    "closed-form E[W|J=1]",
                    partial.conditional_mean_sojourn_busy(params, strategy),
                    busy,
                    SCALAR_BANDS,
                )
            )
        if result.social_benefit_rate is not None:
            rows.append(
                _estimate_row(
                    "closed-form U_s",
                    partial.social_benefit(params, econ, strategy),
                    result.social_benefit_rate,
                    SCALAR_BANDS,
                )
            )
        return rows
    if strategy.q <= 0.0:
        return []
    rows = [
        _estimate_row(
            "decomposition E[W]",
            unobservable.mean_sojourn(params, strategy.q),
            result.mean_sojourn_overall,
            None,
        )
    ]
    if result.social_benefit_rate is not None:
        rows.append(
            _estimate_row(
                "decomposition U_s",
                unobservable.social_benefit(params, econ, strategy.q),
                result.social_benefit_rate,
                None,
            )
        )
    return rows


def _closed_form_vacation_mixture(
    params: QueueParams, strategy: ThresholdPair, solution: ChainSolution
) -> float:
    weight = total = 0.0
    for state, mass in zip(solution.chain.states, solution.pi, strict=True):
        if state.phase is not ServerPhase.VACATION or state.count > strategy.n0:
            continue
        weight += mass
        total += mass * observable.mean_sojourn_vacation(state.count, params)
    return total / weight if weight > 0.0 else math.nan


def all_passed(rows: Iterable[Comparison]) -> bool:
    return all(row.passed for row in rows)
