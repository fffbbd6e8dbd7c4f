"""
Test cases for the command-line interface
"""

# Imports
import json
from pathlib import Path
import shutil

from click.testing import CliRunner
import pandas as pd
import pytest

# Internal imports
from lcmito.data import ingest_csv
from lcmito.main import cli
from lcmito.tasks.simulate import SimulateTask


# Constants
TEST_DIR = Path(__file__).parent
CONFs = TEST_DIR / 'confs'


# Util functions
@pytest.fixture
def tiny_conf(tmp_path) -> Path:
    path = tmp_path / "tiny_sim.yml"
    shutil.copyfile(CONFs / "tiny_sim.yml", path)
    return path


def _invoke(*args: str):
    runner = CliRunner()
    return runner.invoke(cli, list(args))


# Tests
def test_init(tmp_path):
    runner = CliRunner()
    with runner.isolated_filesystem(temp_dir=tmp_path):
        result = runner.invoke(cli, ["init"])
        assert result.exit_code == 0
        assert Path("lcmito.yml").is_file()

        # Never overwrite
        result = runner.invoke(cli, ["init"])
        assert result.exit_code == 1

        result = runner.invoke(cli, ["init", "--file", "study.yml"])
        assert result.exit_code == 0
        assert Path("study.yml").read_text() == Path("lcmito.yml").read_text()


def test_simulate(tiny_conf):
    result = _invoke("simulate", "-f", str(tiny_conf))
    assert result.exit_code == 0
    out = tiny_conf.parent / "tiny_output"
    trajs = ingest_csv(out / "trajectories.csv")
    assert trajs.n_traj == 24
    assert trajs.dim == 3
    assert trajs.grid.n_steps == 20
    phi = pd.read_csv(out / "phi.csv")
    assert list(phi.columns) == ["x_1", "x_2", "x_3"]
    assert phi.loc[1, "x_1"] == 0.5


def test_simulate_is_reproducible(tiny_conf, tmp_path):
    assert _invoke("simulate", "-f", str(tiny_conf), "--out", str(tmp_path / "a")).exit_code == 0  # noqa: E501
    assert _invoke("simulate", "-f", str(tiny_conf), "--out", str(tmp_path / "b")).exit_code == 0  # noqa: E501
    first = (tmp_path / "a" / "trajectories.csv").read_text()
    second = (tmp_path / "b" / "trajectories.csv").read_text()
    assert first == second

    assert _invoke(
        "simulate", "-f", str(tiny_conf), "--out", str(tmp_path / "c"), "--seed", "4"
    ).exit_code == 0
    assert (tmp_path / "c" / "trajectories.csv").read_text() != first


def test_estimate_from_csv(tiny_conf, tmp_path):
    assert _invoke("simulate", "-f", str(tiny_conf)).exit_code == 0
    csv_path = tiny_conf.parent / "tiny_output" / "trajectories.csv"
    result = _invoke(
        "estimate", "-f", str(tiny_conf),
        "--out", str(tmp_path / "est"),
        "--set", f"data={csv_path}",
    )
    assert result.exit_code == 0
    payload = json.loads((tmp_path / "est" / "estimate.json").read_text())
    assert payload["d"] == 3
    # 24 paths with 4 lags of 5δ each
    assert payload["n_pairs"] == 96
    assert payload["delta_c"] == pytest.approx(0.05)
    assert len(payload["phi_tilde"]) == 3
    # Real data carries no true drift
    assert "phi_error" not in payload


def test_estimate_simulated_reports_error(tiny_conf):
    assert _invoke("estimate", "-f", str(tiny_conf)).exit_code == 0
    payload = json.loads(
        (tiny_conf.parent / "tiny_output" / "estimate.json").read_text()
    )
    assert payload["phi_error"] >= 0.0


def test_test_command(tiny_conf):
    result = _invoke("test", "-f", str(tiny_conf), "--workers", "2")
    assert result.exit_code == 0
    out = tiny_conf.parent / "tiny_output"
    payload = json.loads((out / "result.json").read_text())
    assert payload["query"] == {"alpha": 0, "beta": 1, "cond_set": [1, 2]}
    assert 0.0 <= payload["p_value"] <= 1.0
    assert payload["statistic"] >= 0.0
    assert payload["gamma_path_file"] == "gamma.csv"
    assert payload["seed"] == 3
    gamma = pd.read_csv(out / "gamma.csv")
    assert list(gamma.columns) == ["t", "gamma"]
    assert len(gamma) == 21
    assert gamma["gamma"].iloc[0] == 0.0


def test_test_command_single_split(tiny_conf, tmp_path):
    result = _invoke(
        "test", "-f", str(tiny_conf),
        "--out", str(tmp_path / "single"),
        "--set", "test.crossfit=false",
        "--set", "query.alpha=1",
        "--set", "query.beta=2",
    )
    assert result.exit_code == 0
    payload = json.loads((tmp_path / "single" / "result.json").read_text())
    assert payload["query"] == {"alpha": 1, "beta": 2, "cond_set": [0, 2]}


def test_discover(tiny_conf):
    result = _invoke("discover", "-f", str(tiny_conf), "--set", "test.n_splits=2")
    assert result.exit_code == 0
    out = tiny_conf.parent / "tiny_output"
    graph = json.loads((out / "graph.json").read_text())
    assert graph["d"] == 3
    for a, b, p_value, _ in graph["edges"]:
        assert a != b
        assert 0.0 <= p_value < 0.05
    assert (out / "stability.json").is_file()


def test_experiment(tiny_conf):
    result = _invoke("experiment", "-f", str(tiny_conf))
    assert result.exit_code == 0
    out = tiny_conf.parent / "tiny_output"
    table = pd.read_csv(out / "experiment.csv")
    assert len(table) == 1
    assert table.loc[0, "metric"] == "type_i"
    assert table.loc[0, "runs"] == 2
    assert "granger_rate" in table.columns
    runs = pd.read_csv(out / "runs.csv")
    assert len(runs) == 2
    assert "failed" in runs.columns


def test_experiment_needs_section(tmp_path):
    path = tmp_path / "normal_conf.yml"
    shutil.copyfile(CONFs / "normal_conf.yml", path)
    result = _invoke("experiment", "-f", str(path))
    assert result.exit_code == 1


def test_bad_conf_exits_with_one(tmp_path):
    path = tmp_path / "bad_K_type.yml"
    shutil.copyfile(CONFs / "bad_K_type.yml", path)
    assert _invoke("test", "-f", str(path)).exit_code == 1
    assert _invoke("test", "-f", str(tmp_path / "missing.yml")).exit_code == 1


def test_simulate_rejects_data(tiny_conf):
    result = _invoke("simulate", "-f", str(tiny_conf), "--set", "data=x.csv")
    assert result.exit_code == 1


def test_task_return_code_is_exit_code(tiny_conf, monkeypatch):
    monkeypatch.setattr(SimulateTask, "run", lambda self: 3)
    assert _invoke("simulate", "-f", str(tiny_conf)).exit_code == 3

    monkeypatch.setattr(SimulateTask, "run", lambda self: 0)
    assert _invoke("simulate", "-f", str(tiny_conf)).exit_code == 0
