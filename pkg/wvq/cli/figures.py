"""Figure and sweep registry.

Every figure is a sweep of one parameter with the remaining values fixed at
their caption defaults. Points are computed by module-level functions so that
`--jobs` can ship them to worker processes; rows always come back in sweep
order.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial as bind

from wvq.analysis import observable, partial, unobservable
from wvq.engine.chain import ChainMatrix, solve_chain
from wvq.errors import InvalidParameter
from wvq.model import EconParams, QueueParams, validate
from wvq.strategy import BlindJoin, MixedPair

logger = logging.getLogger(__name__)

Row = list[float | int]
Settings = dict[str, float]
PointFn = Callable[[Settings, float], Row]

P_GRID = tuple(round(i / 100, 2) for i in range(1, 100))
MU_B_GRID = (0.5, 0.6, 0.7, 0.8, 0.9)
FIG6_THETAS = (0.1, 0.3, 0.5)
FIG10_MU_B = (0.7, 0.8, 0.9)
DIAGRAM_LEVEL = 6


def bundle(settings: Settings) -> tuple[QueueParams, EconParams]:
    params = QueueParams(
        p=settings["p"],
        mu_b=settings["mu_b"],
        mu_v=settings["mu_v"],
        theta=settings["theta"],
    )
    econ = EconParams(reward=settings["reward"], cost=settings["cost"])
    validated = validate(params, econ)
    return validated.params, validated.econ


def _with(settings: Settings, **changes: float) -> tuple[QueueParams, EconParams]:
    return bundle({**settings, **changes})


# ----------------------------------------------------------------------------
# Sweep points
# ----------------------------------------------------------------------------


def _fig1_point(settings: Settings, mu_b: float) -> Row:
    params, econ = _with(settings, mu_b=mu_b)
    eq = observable.equilibrium_thresholds(params, econ)
    return [mu_b, eq.n0, eq.n1]


def _fig3_point(settings: Settings, p: float) -> Row:
    params, econ = _with(settings, p=p)
    eq = observable.equilibrium_thresholds(params, econ)
    return [p, eq.n0, eq.n1, observable.social_benefit(params, econ, eq)]


def _fig4_point(settings: Settings, mu_b: float) -> Row:
    params, econ = _with(settings, mu_b=mu_b)
    eq = observable.equilibrium_thresholds(params, econ)
    best = observable.socially_optimal_thresholds(params, econ)
    return [mu_b, eq.n0, eq.n1, best.n0, best.n1]


def _fig6_point(settings: Settings, p: float) -> Row:
    row: Row = [p]
    for theta in FIG6_THETAS:
        params, econ = _with(settings, p=p, theta=theta)
        eq = partial.equilibrium_mixed(params, econ)
        row += [eq.q0, eq.q1]
    return row


def _fig7_point(settings: Settings, p: float) -> Row:
    params, econ = _with(settings, p=p)
    eq = partial.equilibrium_mixed(params, econ)
    return [p, eq.q0, eq.q1, partial.social_benefit(params, econ, eq)]


def _fig8_point(settings: Settings, p: float) -> Row:
    params, econ = _with(settings, p=p)
    eq = partial.equilibrium_mixed(params, econ)
    best = partial.socially_optimal_mixed(params, econ)
    return [p, eq.q0, eq.q1, best.q0, best.q1]


def _fig10_point(settings: Settings, p: float) -> Row:
    row: Row = [p]
    for mu_b in FIG10_MU_B:
        params, econ = _with(settings, p=p, mu_b=mu_b)
        row.append(unobservable.equilibrium_join_probability(params, econ))
    return row


def _fig11_point(settings: Settings, p: float) -> Row:
    params, econ = _with(settings, p=p)
    q_e = unobservable.equilibrium_join_probability(params, econ)
    return [p, q_e, unobservable.social_benefit(params, econ, q_e)]


def _fig12_point(settings: Settings, p: float) -> Row:
    params, econ = _with(settings, p=p)
    q_e = unobservable.equilibrium_join_probability(params, econ)
    q_star = unobservable.socially_optimal_join_probability(params, econ)
    return [p, q_e, q_star]


# ----------------------------------------------------------------------------
# Transition diagrams
# ----------------------------------------------------------------------------

EDGE_HEADER = ("from_count", "from_phase", "to_count", "to_phase", "probability")


def edge_rows(chain: ChainMatrix) -> list[Row]:
    rows: list[Row] = []
    for src in chain.states:
        for dst, mass in sorted(chain.row(src).items()):
            rows.append([src.count, int(src.phase), dst.count, int(dst.phase), mass])
    return rows


def _fig2_chain(settings: Settings) -> ChainMatrix:
    params, econ = bundle(settings)
    eq = observable.equilibrium_thresholds(params, econ)
    return observable.transition_matrix(params, eq)


def _fig5_chain(settings: Settings) -> ChainMatrix:
    params, _ = bundle(settings)
    q = MixedPair(1.0, 1.0)
    return partial.truncated_chain_oracle(params, q, DIAGRAM_LEVEL).chain


def _fig9_chain(settings: Settings) -> ChainMatrix:
    params, _ = bundle(settings)
    strategy = BlindJoin(1.0)
    solution = solve_chain(
        params, strategy.join_probability, max_level=DIAGRAM_LEVEL
    )
    return solution.chain


# ----------------------------------------------------------------------------
# Registry
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    description: str
    header: tuple[str, ...]
    defaults: Settings
    swept: tuple[str, ...] = ()
    grid: tuple[float, ...] = ()
    point: PointFn | None = None
    diagram: Callable[[Settings], ChainMatrix] | None = None


def _settings(**values: float) -> Settings:
    return dict(values)


FIGURES: dict[str, FigureSpec] = {
    "fig1": FigureSpec(
        "fig1",
        "observable equilibrium thresholds against mu_b",
        ("mu_b", "n_e0", "n_e1"),
        _settings(p=0.5, mu_b=0.8, mu_v=0.4, theta=0.2, reward=10.0, cost=1.0),
        swept=("mu_b",),
        grid=MU_B_GRID,
        point=_fig1_point,
    ),
    "fig2": FigureSpec(
        "fig2",
        "observable transition diagram at the equilibrium thresholds",
        EDGE_HEADER,
        _settings(p=0.5, mu_b=0.8, mu_v=0.4, theta=0.2, reward=10.0, cost=1.0),
        diagram=_fig2_chain,
    ),
    "fig3": FigureSpec(
        "fig3",
        "observable equilibrium social benefit against p",
        ("p", "n_e0", "n_e1", "U_s"),
        _settings(p=0.5, mu_b=0.8, mu_v=0.4, theta=0.05, reward=10.0, cost=1.0),
        swept=("p",),
        grid=P_GRID,
        point=_fig3_point,
    ),
    "fig4": FigureSpec(
        "fig4",
        "observable equilibrium and socially optimal thresholds against mu_b",
        ("mu_b", "n_e0", "n_e1", "n_star0", "n_star1"),
        _settings(p=0.5, mu_b=0.8, mu_v=0.4, theta=0.3, reward=10.0, cost=1.0),
        swept=("mu_b",),
        grid=MU_B_GRID,
        point=_fig4_point,
    ),
    "fig5": FigureSpec(
        "fig5",
        "partially observable transition diagram, q=(1,1), truncated",
        EDGE_HEADER,
        _settings(p=0.5, mu_b=0.9, mu_v=0.5, theta=0.05, reward=10.0, cost=3.0),
        diagram=_fig5_chain,
    ),
    "fig6": FigureSpec(
        "fig6",
        "partially observable equilibrium pair against p for several theta",
        ("p",)
        + tuple(f"{c}_theta{t:g}" for t in FIG6_THETAS for c in ("q_e0", "q_e1")),
        _settings(p=0.5, mu_b=0.8, mu_v=0.4, theta=0.3, reward=8.0, cost=3.0),
        swept=("p", "theta"),
        grid=P_GRID,
        point=_fig6_point,
    ),
    "fig7": FigureSpec(
        "fig7",
        "partially observable equilibrium social benefit against p",
        ("p", "q_e0", "q_e1", "U_s"),
        _settings(p=0.5, mu_b=0.9, mu_v=0.5, theta=0.05, reward=10.0, cost=3.0),
        swept=("p",),
        grid=P_GRID,
        point=_fig7_point,
    ),
    "fig8": FigureSpec(
        "fig8",
        "partially observable equilibrium and socially optimal pairs against p",
        ("p", "q_e0", "q_e1", "q_star0", "q_star1"),
        _settings(p=0.5, mu_b=0.9, mu_v=0.5, theta=0.05, reward=10.0, cost=3.0),
        swept=("p",),
        grid=tuple(round(i / 100, 2) for i in range(5, 100, 5)),
        point=_fig8_point,
    ),
    "fig9": FigureSpec(
        "fig9",
        "unobservable transition diagram, q=1, truncated",
        EDGE_HEADER,
        _settings(p=0.5, mu_b=0.9, mu_v=0.5, theta=0.3, reward=4.5, cost=1.0),
        diagram=_fig9_chain,
    ),
    "fig10": FigureSpec(
        "fig10",
        "unobservable equilibrium join probability against p for several mu_b",
        ("p",) + tuple(f"q_e_mu_b{m:g}" for m in FIG10_MU_B),
        _settings(p=0.5, mu_b=0.9, mu_v=0.5, theta=0.3, reward=4.5, cost=1.0),
        swept=("p", "mu_b"),
        grid=P_GRID,
        point=_fig10_point,
    ),
    "fig11": FigureSpec(
        "fig11",
        "unobservable equilibrium social benefit against p",
        ("p", "q_e", "U_s"),
        _settings(p=0.5, mu_b=0.9, mu_v=0.5, theta=0.3, reward=4.5, cost=1.0),
        swept=("p",),
        grid=P_GRID,
        point=_fig11_point,
    ),
    "fig12": FigureSpec(
        "fig12",
        "unobservable equilibrium and socially optimal join probabilities",
        ("p", "q_e", "q_star"),
        _settings(p=0.5, mu_b=0.9, mu_v=0.5, theta=0.3, reward=4.5, cost=1.0),
        swept=("p",),
        grid=P_GRID,
        point=_fig12_point,
    ),
}


def evaluate(
    point: PointFn, settings: Settings, grid: Sequence[float], jobs: int = 1
) -> list[Row]:
    task = bind(point, settings)
    if jobs <= 1:
        return [task(x) for x in grid]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(task, grid))


def figure_rows(
    figure_id: str, overrides: Settings | None = None, jobs: int = 1
) -> tuple[tuple[str, ...], list[Row]]:
    spec = FIGURES.get(figure_id)
    if spec is None:
        raise InvalidParameter("figure", figure_id, f"known: {', '.join(FIGURES)}")
    overrides = overrides or {}
    for key in overrides:
        if key in spec.swept:
            raise InvalidParameter(key, overrides[key], f"is swept by {figure_id}")
    settings = {**spec.defaults, **overrides}
    logger.debug("figure %s with %s", figure_id, settings)
    if spec.diagram is not None:
        return spec.header, edge_rows(spec.diagram(settings))
    assert spec.point is not None
    return spec.header, evaluate(spec.point, settings, spec.grid, jobs)


# ----------------------------------------------------------------------------
# Generic sweeps
# ----------------------------------------------------------------------------

SWEEP_COLUMNS: dict[str, tuple[str, ...]] = {
    "observable": ("n_e0", "n_e1", "n_star0", "n_star1", "U_s_e", "U_s_star"),
    "partial": ("q_e0", "q_e1", "q_star0", "q_star1", "U_s_e", "U_s_star"),
    "unobservable": ("q_e", "q_star", "U_s_e", "U_s_star"),
}


def sweep_point(case: str, field_name: str, settings: Settings, x: float) -> Row:
    params, econ = _with(settings, **{field_name: x})
    if case == "observable":
        eq = observable.equilibrium_thresholds(params, econ)
        best = observable.socially_optimal_thresholds(params, econ)
        return [
            x,
            eq.n0,
            eq.n1,
            best.n0,
            best.n1,
            observable.social_benefit(params, econ, eq),
            observable.social_benefit(params, econ, best),
        ]
    if case == "partial":
        eq_pair = partial.equilibrium_mixed(params, econ)
        best_pair = partial.socially_optimal_mixed(params, econ)
        return [
            x,
            eq_pair.q0,
            eq_pair.q1,
            best_pair.q0,
            best_pair.q1,
            partial.social_benefit(params, econ, eq_pair),
            partial.social_benefit(params, econ, best_pair),
        ]
    if case == "unobservable":
        q_e = unobservable.equilibrium_join_probability(params, econ)
        q_star = unobservable.socially_optimal_join_probability(params, econ)
        return [
            x,
            q_e,
            q_star,
            unobservable.social_benefit(params, econ, q_e),
            unobservable.social_benefit(params, econ, q_star),
        ]
    raise InvalidParameter("case", case)


def sweep_rows(
    case: str,
    parameter: str,
    field_name: str,
    points: Sequence[float],
    settings: Settings,
    jobs: int = 1,
) -> tuple[tuple[str, ...], list[Row]]:
    if case not in SWEEP_COLUMNS:
        raise InvalidParameter("case", case)
    point = bind(sweep_point, case, field_name)
    return (parameter,) + SWEEP_COLUMNS[case], evaluate(point, settings, points, jobs)
