from __future__ import annotations

import json
from pathlib import Path

import pytest
from pytest_mock import MockerFixture
from typer.testing import CliRunner

from psk_keyrate.cli import app
from psk_keyrate.rates import RatePoint
from psk_keyrate.sweep import CSV_COLUMNS, ResultTable, SweepRow

runner = CliRunner()


def _csv_lines(output: str) -> list[str]:
    return [line for line in output.splitlines() if "," in line]


def test_rate_command_prints_a_csv_row() -> None:
    result = runner.invoke(app, ["rate", "--z", "0.1", "--db", "0", "--direction", "gaussian", "--vm", "0.02"])

    assert result.exit_code == 0
    header, row = _csv_lines(result.stdout)
    assert header == ",".join(CSV_COLUMNS)
    assert "0.014355293" in row


def test_rate_command_json_output() -> None:
    result = runner.invoke(
        app, ["rate", "--z", "0.5", "--tau", "0.8", "--direction", "dr-upper", "--n", "inf", "--format", "json"]
    )

    assert result.exit_code == 0
    start = result.stdout.index("{")
    document = json.loads(result.stdout[start:])
    assert document["rows"][0]["N"] == "inf"
    assert document["rows"][0]["direction"] == "dr-upper"


def test_entropy_command_repeats_radius() -> None:
    result = runner.invoke(app, ["entropy", "--z", "0", "--z", "3"])

    assert result.exit_code == 0
    assert len(_csv_lines(result.stdout)) == 3


def test_conflicting_channel_flags_are_rejected() -> None:
    result = runner.invoke(app, ["rate", "--z", "0.1", "--db", "3", "--tau", "0.5"])
    assert result.exit_code == 2


def test_reverse_reconciliation_needs_a_finite_alphabet() -> None:
    result = runner.invoke(app, ["rate", "--z", "0.1", "--db", "3", "--n", "inf"])
    assert result.exit_code == 2


def test_unknown_figure_is_a_usage_error() -> None:
    result = runner.invoke(app, ["figure", "fig9"])
    assert result.exit_code == 2


def test_bad_log_level_is_a_usage_error() -> None:
    result = runner.invoke(app, ["--log-level", "chatty", "entropy", "--z", "1"])
    assert result.exit_code == 2


def test_sweep_writes_the_output_file(tmp_path: Path) -> None:
    config = tmp_path / "sweep.json"
    out = tmp_path / "results" / "gaussian.csv"
    config.write_text(
        json.dumps(
            {
                "protocol": {"n": 4, "z": [0.1, 1.0]},
                "channel": {"db": [0.0, 10.0], "nbar": 0.0},
                "reconciliation": {"direction": "gaussian"},
            }
        )
    )

    result = runner.invoke(app, ["sweep", str(config), "--out", str(out)])

    assert result.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 5


def test_sweep_flags_override_the_file(tmp_path: Path, mocker: MockerFixture) -> None:
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({"n": 4, "z": [0.1], "db": [1.0], "nbar": 0.0, "direction": "rr"}))
    run = mocker.patch("psk_keyrate.cli.run_sweep", return_value=ResultTable())

    result = runner.invoke(app, ["--workers", "3", "sweep", str(config), "--tau", "0.5", "--epsilon", "0.01"])

    assert result.exit_code == 0
    cfg, settings = run.call_args.args
    assert cfg.tau == (0.5,) and cfg.db is None
    assert cfg.epsilon == 0.01 and cfg.nbar is None
    assert settings.workers == 3


def test_unconverged_figure_exits_with_status_three(mocker: MockerFixture) -> None:
    point = RatePoint(z=0.1, n=4, tau=0.5, nbar=0.0, direction="rr", rate=0.001, converged=False)
    preset = mocker.patch("psk_keyrate.cli.figure_preset", return_value=ResultTable([SweepRow(point)], "fig6"))

    result = runner.invoke(app, ["figure", "fig6", "--mode", "unconditioned"])

    assert result.exit_code == 3
    assert preset.call_args.kwargs["mode"] == "unconditioned"
    assert _csv_lines(result.stdout)[-1].endswith("false")


def test_strict_paper_mode_is_accepted(mocker: MockerFixture) -> None:
    run = mocker.patch("psk_keyrate.cli.run_sweep", return_value=ResultTable())

    result = runner.invoke(app, ["rate", "--z", "0.3", "--db", "3", "--nbar", "0.01", "--mode", "strict-paper"])

    assert result.exit_code == 0
    cfg, _ = run.call_args.args
    assert cfg.mode == "strict-paper"


def test_figure_accepts_strict_paper_mode(mocker: MockerFixture) -> None:
    preset = mocker.patch("psk_keyrate.cli.figure_preset", return_value=ResultTable(label="fig6"))

    result = runner.invoke(app, ["figure", "fig6", "--mode", "strict-paper"])

    assert result.exit_code == 0
    assert preset.call_args.kwargs["mode"] == "strict-paper"


def test_malformed_environment_is_a_usage_error(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("PSK_KEYRATE_GRID_RADIAL", "abc")

    result = runner.invoke(app, ["entropy", "--z", "1"])

    assert result.exit_code == 2
