from __future__ import annotations

from pathlib import Path

import pytest

from wvq.cli import config as cli_config
from wvq.cli.main import main
from wvq.errors import InvalidParameter

FIG1_FLAGS = [
    "--p",
    "0.5",
    "--mu-b",
    "0.8",
    "--mu-v",
    "0.4",
    "--theta",
    "0.2",
    "--reward",
    "10",
    "--cost",
    "1",
]


def _pairs(text: str) -> dict[str, str]:
    return dict(line.split("=", 1) for line in text.strip().splitlines())


def test_analyze_observable_reports_equilibrium_thresholds(
    capsys: pytest.CaptureFixture[str],
) -> None:
    assert main(["analyze", "observable", *FIG1_FLAGS]) == 0
    pairs = _pairs(capsys.readouterr().out)
    assert pairs["case"] == "observable"
    assert pairs["n_e(0)"] == "4"
    assert pairs["n_e(1)"] == "7"
    assert float(pairs["U_s(optimal)"]) >= float(pairs["U_s(equilibrium)"])


def test_analyze_unobservable_reports_join_probabilities(
    capsys: pytest.CaptureFixture[str],
) -> None:
    flags = ["--p", "0.5", "--mu-b", "0.9", "--mu-v", "0.5", "--theta", "0.3"]
    flags += ["--reward", "4.5", "--cost", "1"]
    assert main(["analyze", "unobservable", *flags]) == 0
    pairs = _pairs(capsys.readouterr().out)
    assert 0.0 <= float(pairs["q_star"]) <= float(pairs["q_e"]) + 1e-9


def test_missing_model_flag_is_bad_input(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["analyze", "observable", *FIG1_FLAGS[:-2]]) == 2
    assert "--cost" in capsys.readouterr().err


def test_out_of_range_flag_is_bad_input() -> None:
    flags = [*FIG1_FLAGS]
    flags[1] = "1.5"
    assert main(["analyze", "observable", *flags]) == 2


def test_unknown_subcommand_is_bad_input() -> None:
    assert main(["plot"]) == 2


def test_config_file_supplies_defaults_and_flags_override(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    path = tmp_path / "fig1.conf"
    path.write_text(
        "# figure one rates\np=0.5\nmu_b=0.5\nmu_v=0.4\ntheta=0.2\nreward=10\ncost=1\n",
        encoding="utf-8",
    )
    assert main(["analyze", "observable", "--config", str(path)]) == 0
    assert _pairs(capsys.readouterr().out)["n_e(1)"] == "4"
    assert main(["analyze", "observable", "--config", str(path), "--mu-b", "0.9"]) == 0
    assert _pairs(capsys.readouterr().out)["n_e(1)"] == "8"


def test_config_file_rejects_unknown_keys(tmp_path: Path) -> None:
    path = tmp_path / "bad.conf"
    path.write_text("p=0.5\nlambda=0.3\n", encoding="utf-8")
    with pytest.raises(InvalidParameter):
        cli_config.load_config(path)
    assert main(["analyze", "observable", "--config", str(path)]) == 2


def test_seed_comes_from_environment() -> None:
    assert cli_config.default_seed({}) == cli_config.DEFAULT_SEED
    assert cli_config.default_seed({"WVQ_SEED": "42"}) == 42
    with pytest.raises(InvalidParameter):
        cli_config.default_seed({"WVQ_SEED": "forty-two"})


def test_figure_one_csv(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["figure", "fig1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == [
        "mu_b,n_e0,n_e1",
        "0.5,2,4",
        "0.6,3,5",
        "0.7,3,6",
        "0.8,4,7",
        "0.9,4,8",
    ]


def test_figure_output_is_byte_identical(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["figure", "fig4"]) == 0
    first = capsys.readouterr().out
    assert main(["figure", "fig4"]) == 0
    assert capsys.readouterr().out == first
    assert first.splitlines()[0] == "mu_b,n_e0,n_e1,n_star0,n_star1"


def test_unknown_figure_and_swept_override_are_bad_input() -> None:
    assert main(["figure", "fig99"]) == 2
    assert main(["figure", "fig1", "--mu-b", "0.7"]) == 2


def test_sweep_csv(capsys: pytest.CaptureFixture[str]) -> None:
    argv = [
        "sweep",
        "unobservable",
        "--parameter",
        "p",
        "--from",
        "0.2",
        "--to",
        "0.4",
        "--step",
        "0.1",
        "--mu-b",
        "0.9",
        "--mu-v",
        "0.5",
        "--theta",
        "0.3",
        "--reward",
        "4.5",
        "--cost",
        "1",
    ]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "p,q_e,q_star,U_s_e,U_s_star"
    assert [line.split(",")[0] for line in lines[1:]] == ["0.2", "0.3", "0.4"]


def test_sweep_range_outside_domain_is_bad_input() -> None:
    argv = ["sweep", "observable", "--parameter", "p", "--from", "0.5"]
    argv += ["--to", "1.5", "--step", "0.1", *FIG1_FLAGS[2:]]
    assert main(argv) == 2


def test_validate_observable_passes(capsys: pytest.CaptureFixture[str]) -> None:
    argv = ["validate", "observable", *FIG1_FLAGS, "--slots", "200000"]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "metric,analytic,empirical,stderr,z,gated,status"
    assert not any(line.endswith(",FAIL") for line in lines[1:])
    assert any(line.startswith("transition_violations,0,0,") for line in lines)


def test_validate_detects_corrupted_event_order(
    capsys: pytest.CaptureFixture[str],
) -> None:
    argv = ["validate", "observable", *FIG1_FLAGS, "--slots", "100000"]
    assert main([*argv, "--corrupt-event-order"]) == 1
    assert ",FAIL" in capsys.readouterr().out


def test_validate_is_reproducible_with_environment_seed(
    monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    monkeypatch.setenv("WVQ_SEED", "7")
    argv = ["validate", "observable", *FIG1_FLAGS, "--slots", "30000"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first


def test_validate_with_too_few_slots_is_unstable_exit(
    capsys: pytest.CaptureFixture[str],
) -> None:
    assert main(["validate", "observable", *FIG1_FLAGS, "--slots", "100"]) == 3
    assert "post-warmup slots" in capsys.readouterr().err


def test_validate_partial_with_explicit_pair(
    capsys: pytest.CaptureFixture[str],
) -> None:
    flags = ["--p", "0.5", "--mu-b", "0.9", "--mu-v", "0.5", "--theta", "0.05"]
    argv = ["validate", "partial", *flags, "--reward", "10", "--cost", "3"]
    argv += ["--q0", "0.6", "--q1", "0.8", "--slots", "200000"]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "closed-form E[W|J=1]" in out
