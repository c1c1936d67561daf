"""Command-line front end.

Subcommands:

- `analyze CASE`: equilibrium and socially optimal strategies at one point.
- `figure ID`: CSV series for one figure, caption defaults unless overridden.
- `validate CASE`: simulation against the exact and closed-form values.
- `sweep CASE`: strategies and welfare over a one-parameter range.

Exit codes: 0 ok, 1 validation failure, 2 bad input, 3 unstable system or too
few samples.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from typing import Any

from pydantic import ValidationError as SchemaError

from wvq.cli import config as cli_config
from wvq.cli import figures, report
from wvq.cli.schemas import ParameterFile, SweepSpec
from wvq.errors import (
    InsufficientSamples,
    InvalidParameter,
    Unstable,
    WVQError,
)
from wvq.sim.simulator import SimConfig, simulate
from wvq.strategy import BlindJoin, MixedPair, Strategy, ThresholdPair

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_UNSTABLE = 3

CASES = ("observable", "partial", "unobservable")
MODEL_FLAGS = (
    ("p", "--p"),
    ("mu_b", "--mu-b"),
    ("mu_v", "--mu-v"),
    ("theta", "--theta"),
    ("reward", "--reward"),
    ("cost", "--cost"),
)
DEFAULT_SLOTS = 1_000_000
DEFAULT_WARMUP = 10_000


class UsageError(Exception):
    """Raised for a command line that parses but is incomplete."""


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    for dest, flag in MODEL_FLAGS:
        group.add_argument(flag, dest=dest, type=float, default=None)
    group.add_argument("--config", default=None, help="key=value parameter file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wvq",
        description="Strategic customers in a Geo/Geo/1 working-vacation queue.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="strategies at a single point")
    analyze.add_argument("case", choices=CASES)
    _add_model_flags(analyze)

    figure = sub.add_parser("figure", help="CSV series for a figure")
    figure.add_argument("figure_id", metavar="ID")
    _add_model_flags(figure)
    figure.add_argument("--jobs", type=int, default=1)

    validate = sub.add_parser("validate", help="simulation against analysis")
    validate.add_argument("case", choices=CASES)
    _add_model_flags(validate)
    validate.add_argument("--thresholds", default=None, help="n0,n1 (observable)")
    validate.add_argument("--q0", type=float, default=None)
    validate.add_argument("--q1", type=float, default=None)
    validate.add_argument("--q", type=float, default=None)
    validate.add_argument("--slots", type=int, default=None)
    validate.add_argument("--warmup", type=int, default=None)
    validate.add_argument("--seed", type=int, default=None)
    validate.add_argument("--batches", type=int, default=50)
    validate.add_argument("--corrupt-event-order", action="store_true")

    sweep = sub.add_parser("sweep", help="strategies over a parameter range")
    sweep.add_argument("case", choices=CASES)
    sweep.add_argument(
        "--parameter", required=True, choices=("p", "mu_b", "mu_v", "theta", "R", "C")
    )
    sweep.add_argument("--from", dest="start", type=float, required=True)
    sweep.add_argument("--to", dest="stop", type=float, required=True)
    sweep.add_argument("--step", type=float, required=True)
    _add_model_flags(sweep)
    sweep.add_argument("--jobs", type=int, default=1)
    return parser


# ----------------------------------------------------------------------------
# Parameter resolution
# ----------------------------------------------------------------------------


def _file_values(args: argparse.Namespace) -> ParameterFile:
    if args.config is None:
        return ParameterFile()
    return cli_config.load_config(args.config)


def _flag_values(args: argparse.Namespace) -> dict[str, float]:
    return {
        dest: getattr(args, dest)
        for dest, _ in MODEL_FLAGS
        if getattr(args, dest) is not None
    }


def _settings(
    args: argparse.Namespace, file_values: ParameterFile, *, skip: Sequence[str] = ()
) -> dict[str, float]:
    merged: dict[str, Any] = {**file_values.present(), **_flag_values(args)}
    settings = {
        dest: float(merged[dest]) for dest, _ in MODEL_FLAGS if dest in merged
    }
    missing = [
        flag for dest, flag in MODEL_FLAGS if dest not in settings and dest not in skip
    ]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")
    return settings


def _strategy(args: argparse.Namespace) -> Strategy | None:
    if args.case == "observable" and args.thresholds is not None:
        try:
            n0, n1 = (int(part) for part in args.thresholds.split(","))
        except ValueError as exc:
            raise InvalidParameter(
                "thresholds", args.thresholds, "expected n0,n1"
            ) from exc
        return ThresholdPair(n0, n1)
    if args.case == "partial" and (args.q0 is not None or args.q1 is not None):
        if args.q0 is None or args.q1 is None:
            raise UsageError("--q0 and --q1 go together")
        return MixedPair(args.q0, args.q1)
    if args.case == "unobservable" and args.q is not None:
        return BlindJoin(args.q)
    return None


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    params, econ = figures.bundle(_settings(args, _file_values(args)))
    report.write_pairs(sys.stdout, report.analyze_pairs(args.case, params, econ))
    return EXIT_OK


def cmd_figure(args: argparse.Namespace) -> int:
    overrides = {**_file_values(args).present(), **_flag_values(args)}
    overrides = {k: float(v) for k, v in overrides.items() if k in dict(MODEL_FLAGS)}
    header, rows = figures.figure_rows(args.figure_id, overrides, jobs=args.jobs)
    report.write_csv(sys.stdout, header, rows)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    file_values = _file_values(args)
    params, econ = figures.bundle(_settings(args, file_values))
    strategy = _strategy(args) or report.default_strategy(args.case, params, econ)

    slots = args.slots or file_values.slots or DEFAULT_SLOTS
    warmup = args.warmup if args.warmup is not None else file_values.warmup
    if warmup is None:
        warmup = min(DEFAULT_WARMUP, slots // 10)
    seed = args.seed if args.seed is not None else file_values.seed
    if seed is None:
        seed = cli_config.default_seed()

    sim_config = SimConfig(
        slots=slots,
        warmup=warmup,
        seed=seed,
        batches=args.batches,
        corrupt_event_order=args.corrupt_event_order,
    )
    logger.info("validating %s with %s over %d slots", args.case, strategy, slots)
    result = simulate(params, econ, strategy, sim_config)
    rows = report.compare(params, econ, strategy, result, sim_config.window)
    report.write_csv(sys.stdout, report.VALIDATION_HEADER, (r.row() for r in rows))
    return EXIT_OK if report.all_passed(rows) else EXIT_VALIDATION_FAILED


def cmd_sweep(args: argparse.Namespace) -> int:
    file_values = _file_values(args)
    try:
        spec = SweepSpec.model_validate(
            {
                "parameter": args.parameter,
                "from": args.start,
                "to": args.stop,
                "step": args.step,
                "fixed": {},
            }
        )
    except SchemaError as exc:
        message = exc.errors()[0]["msg"]
        raise InvalidParameter("sweep", args.parameter, message) from exc
    settings = _settings(args, file_values, skip=(spec.field_name,))
    spec = spec.model_copy(update={"fixed": settings})
    header, rows = figures.sweep_rows(
        args.case,
        spec.parameter,
        spec.field_name,
        spec.points(),
        {**spec.fixed, spec.field_name: spec.points()[0]},
        jobs=args.jobs,
    )
    report.write_csv(sys.stdout, header, rows)
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "figure": cmd_figure,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"wvq: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except InvalidParameter as exc:
        print(f"wvq: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (Unstable, InsufficientSamples) as exc:
        print(f"wvq: error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except WVQError as exc:
        print(f"wvq: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE


if __name__ == "__main__":
    raise SystemExit(main())
