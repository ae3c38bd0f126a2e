"""Tests for the command line interface."""

import json
from unittest.mock import AsyncMock, MagicMock

import pytest
from click.testing import CliRunner

from active_consensus import main
from active_consensus.errors import (
    ConfigError,
    ConvergenceError,
    NonFiniteStateError,
    UnstableStepError,
)
from active_consensus.main import EXIT_FAILED, EXIT_INVALID, EXIT_OK, cli, exit_code_for


def _document(**overrides):
    document = {
        "schema_version": 1,
        "name": "pair",
        "horizon": 30.0,
        "topology": {"kind": "path", "n": 2},
        "schedule": {"epochs": [{"t": 0.0, "weights": [1.0, 1.0]}]},
        "signals": [
            {"kind": "constant", "params": {"value": 0.0}},
            {"kind": "constant", "params": {"value": 2.0}},
        ],
        "rates": {"step": 0.01},
        "initial": {"x": [0.0, 2.0]},
    }
    document.update(overrides)
    return document


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def write_config(tmp_path):
    def write(filename="scenario.json", /, **overrides):
        path = tmp_path / filename
        path.write_text(json.dumps(_document(**overrides)), encoding="utf-8")
        return str(path)

    return write


def test_exit_codes_for_errors():
    assert exit_code_for(ConfigError("bad")) == EXIT_INVALID
    assert exit_code_for(UnstableStepError(1.0, 0.5)) == EXIT_INVALID
    assert exit_code_for(NonFiniteStateError("blew up")) == EXIT_FAILED
    assert exit_code_for(ConvergenceError("no fit")) == EXIT_FAILED


def test_analyze_writes_report(runner, write_config, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["analyze", "-c", write_config(), "-o", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    assert "pair: PASS" in result.output
    report = json.loads((out / "pair" / "analysis.json").read_text())
    assert report["all_hurwitz"] is True
    assert report["passed"] is True


def test_analyze_fails_when_step_is_not_schur_stable(runner, write_config, tmp_path):
    config = write_config(rates={"step": 0.01, "delta_c": 5.0, "delta_s": 5.0})
    result = runner.invoke(cli, ["analyze", "-c", config, "-o", str(tmp_path / "out")])
    assert result.exit_code == EXIT_FAILED
    assert "pair: FAIL" in result.output


def test_simulate_ct_outputs(runner, write_config, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["simulate-ct", "-c", write_config(), "-o", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    directory = out / "pair"
    header = (directory / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,x_1,x_2,v_1,v_2,avg,err_1,err_2"
    assert (directory / "errors.csv").read_text().startswith("t,max_err\n")
    summary = json.loads((directory / "summary.json").read_text())
    assert summary["mode"] == "ct"
    assert summary["final_error"] < 1e-2


def test_simulate_dt_refuses_unstable_step(runner, write_config, tmp_path):
    config = write_config(horizon=50.0, rates={"delta_c": 5.0, "delta_s": 5.0})
    out = str(tmp_path / "out")
    result = runner.invoke(cli, ["simulate-dt", "-c", config, "-o", out])
    assert result.exit_code == EXIT_INVALID
    assert "error:" in result.output

    forced = runner.invoke(cli, ["simulate-dt", "-c", config, "-o", out, "--allow-unstable"])
    assert forced.exit_code != EXIT_INVALID


def test_bad_config_is_invalid(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\n  \"horizon\": ,\n}", encoding="utf-8")
    result = runner.invoke(cli, ["analyze", "-c", str(path), "-o", str(tmp_path / "out")])
    assert result.exit_code == EXIT_INVALID
    assert "broken.json:2:" in result.output


def test_missing_config_is_a_usage_error(runner, tmp_path):
    result = runner.invoke(cli, ["analyze", "-c", str(tmp_path / "absent.json")])
    assert result.exit_code == EXIT_INVALID


def test_certify_without_dwell_is_invalid(runner, write_config, tmp_path):
    result = runner.invoke(cli, ["certify", "-c", write_config(), "-o", str(tmp_path / "out")])
    assert result.exit_code == EXIT_INVALID
    assert "dwell" in result.output


def test_duplicate_names_get_separate_directories(runner, write_config, tmp_path):
    config = write_config()
    out = tmp_path / "out"
    result = runner.invoke(cli, ["analyze", "-c", config, "-c", config, "-o", str(out), "-j", "2"])
    assert result.exit_code == EXIT_OK, result.output
    assert (out / "pair" / "analysis.json").exists()
    assert (out / "pair-1" / "analysis.json").exists()


def test_worst_exit_code_wins(runner, write_config, tmp_path):
    good = write_config("good.json")
    bad = write_config("bad.json", name="fast", rates={"step": 0.01, "delta_c": 5.0, "delta_s": 5.0})
    result = runner.invoke(cli, ["analyze", "-c", good, "-c", bad, "-o", str(tmp_path / "out")])
    assert result.exit_code == EXIT_FAILED
    assert "pair: PASS" in result.output
    assert "fast: FAIL" in result.output


def test_environment_settings(runner, write_config, tmp_path):
    out = tmp_path / "env-out"
    result = runner.invoke(cli, ["analyze", "-c", write_config()], env={"ACONS_OUT": str(out)})
    assert result.exit_code == EXIT_OK, result.output
    assert (out / "pair" / "analysis.json").exists()


def test_invalid_environment_is_rejected(runner, write_config):
    result = runner.invoke(cli, ["analyze", "-c", write_config()], env={"ACONS_JOBS": "0"})
    assert result.exit_code == EXIT_INVALID
    assert "ACONS_" in result.output


def test_demo_writes_config_and_analysis(runner, tmp_path, mocker):
    mocker.patch.object(main, "certify_runner", return_value=lambda config, directory: True)
    out = tmp_path / "out"
    result = runner.invoke(cli, ["demo", "random", "--seed", "3", "-o", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    (directory,) = [path for path in out.iterdir() if path.is_dir()]
    assert json.loads((directory / "config.json").read_text())["schema_version"] == 1
    assert json.loads((directory / "analysis.json").read_text())["passed"] is True


@pytest.mark.parametrize("name", ["fig2", "ring"])
def test_demo_fig2_runs_continuous_time(runner, tmp_path, mocker, name):
    ct = mocker.patch.object(main, "ct_runner", return_value=True)
    out = tmp_path / "out"
    result = runner.invoke(cli, ["demo", name, "-o", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    ct.assert_called_once()
    assert json.loads((out / "fig2" / "config.json").read_text())["name"] == "fig2"


@pytest.mark.parametrize("name", ["fig4", "leaders"])
def test_demo_fig4_runs_containment(runner, tmp_path, mocker, name):
    factory = mocker.patch.object(main, "containment_runner", return_value=lambda config, directory: True)
    out = tmp_path / "out"
    result = runner.invoke(cli, ["demo", name, "-o", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    factory.assert_called_once_with(False)
    assert (out / "fig4" / "analysis.json").exists()


def test_demo_rejects_unknown_name(runner):
    result = runner.invoke(cli, ["demo", "fig9"])
    assert result.exit_code == EXIT_INVALID


def test_serve_stdio(runner, mocker):
    server = MagicMock()
    server.run_stdio_async = AsyncMock()
    build = mocker.patch.object(main, "build_server", return_value=server)
    result = runner.invoke(cli, ["serve", "-d", "analysis", "-d", "simulation"])
    assert result.exit_code == EXIT_OK, result.output
    build.assert_called_once_with(["analysis", "simulation"])
    server.run_stdio_async.assert_awaited_once()


def test_serve_http(runner, mocker):
    server = MagicMock()
    mocker.patch.object(main, "build_server", return_value=server)
    run_http = mocker.patch.object(main, "run_http_server")
    result = runner.invoke(cli, ["serve", "--mode", "http", "--host", "0.0.0.0", "-p", "9000"])
    assert result.exit_code == EXIT_OK, result.output
    run_http.assert_called_once_with(server, "0.0.0.0", 9000)


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == EXIT_OK
    assert "0.1.0" in result.output
