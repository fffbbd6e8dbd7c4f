"""
Test cases for trajectory CSV and result JSON I/O
"""

# Imports
from pathlib import Path

import numpy as np
import pytest

from lcmito import data, lcmtest, ligraph, sdesim
from lcmito.filtering import QuerySpec


# Constants
SMALL_CSV = """traj_id,t,x_1,x_2
0,0.0,1.0,2.0
0,0.1,1.5,2.5
0,0.2,1.25,2.0
1,0.0,-1.0,0.0
1,0.1,-0.5,0.25
1,0.2,0.0,0.5
"""


# Util functions
def _write(tmp_path: Path, text: str, name: str = "trajectories.csv") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


# Tests
def test_ingest_small_file(tmp_path):
    trajs = data.ingest_csv(_write(tmp_path, SMALL_CSV))
    assert trajs.n_traj == 2
    assert trajs.dim == 2
    assert trajs.grid.n_steps == 2
    assert trajs.grid.delta == pytest.approx(0.1)
    assert trajs.values[1, 2, 1] == 0.5
    assert list(trajs.traj_ids) == [0, 1]


def test_ingest_missing_cell(tmp_path):
    text = SMALL_CSV.replace("1,0.1,-0.5,0.25", "1,0.1,,0.25")
    with pytest.raises(ValueError) as cm:
        data.ingest_csv(_write(tmp_path, text))
    assert "line 6: missing value in column `x_1`" == str(cm.value)


def test_ingest_non_numeric_cell(tmp_path):
    text = SMALL_CSV.replace("0,0.2,1.25,2.0", "0,0.2,1.25,abc")
    with pytest.raises(ValueError) as cm:
        data.ingest_csv(_write(tmp_path, text))
    assert "line 4: non-numeric value `abc` in column `x_2`" == str(cm.value)


def test_ingest_bad_header(tmp_path):
    text = SMALL_CSV.replace("traj_id,t,x_1,x_2", "id,time,x_1,x_2")
    path = _write(tmp_path, text)
    with pytest.raises(ValueError) as cm:
        data.ingest_csv(path)
    assert f"`{path}` header must be `traj_id,t,x_1,...,x_d`, got `id,time,x_1,x_2`" == str(cm.value)  # noqa: E501


def test_ingest_ragged(tmp_path):
    text = SMALL_CSV.replace("1,0.2,0.0,0.5\n", "")
    with pytest.raises(ValueError) as cm:
        data.ingest_csv(_write(tmp_path, text))
    assert "line 5: trajectory 1 has 2 rows, expected 3" == str(cm.value)


def test_ingest_interleaved(tmp_path):
    text = """traj_id,t,x_1
0,0.0,1.0
1,0.0,1.0
0,0.1,1.0
1,0.1,1.0
"""
    with pytest.raises(ValueError) as cm:
        data.ingest_csv(_write(tmp_path, text))
    assert "line 4: trajectory 0 is not contiguous" == str(cm.value)


def test_ingest_non_uniform_grid(tmp_path):
    text = SMALL_CSV.replace("0,0.1,", "0,0.15,").replace("1,0.1,", "1,0.15,")
    with pytest.raises(ValueError) as cm:
        data.ingest_csv(_write(tmp_path, text))
    assert "time grid is not uniform" in str(cm.value)


def test_ingest_mismatched_grid(tmp_path):
    text = SMALL_CSV.replace("1,0.1,", "1,0.11,")
    with pytest.raises(ValueError) as cm:
        data.ingest_csv(_write(tmp_path, text))
    assert "line 5: trajectory 1 is observed on a different time grid" == str(cm.value)


def test_ingest_non_consecutive_ids(tmp_path):
    text = SMALL_CSV.replace("\n1,", "\n3,")
    with pytest.raises(ValueError) as cm:
        data.ingest_csv(_write(tmp_path, text))
    assert "line 5: trajectory ids must be consecutive, expected 1, got 3" == str(cm.value)  # noqa: E501


def test_ingest_ids_may_start_anywhere(tmp_path):
    text = SMALL_CSV.replace("\n0,", "\n7,").replace("\n1,", "\n8,")
    trajs = data.ingest_csv(_write(tmp_path, text))
    assert list(trajs.traj_ids) == [7, 8]


def test_ingest_grid_not_starting_at_zero(tmp_path):
    text = (
        SMALL_CSV.replace(",0.2,", ",0.3,")
        .replace(",0.1,", ",0.2,")
        .replace(",0.0,", ",0.1,")
    )
    with pytest.raises(ValueError) as cm:
        data.ingest_csv(_write(tmp_path, text))
    assert "line 2: time grid must start at t = 0, got 0.1" == str(cm.value)


def test_csv_round_trip_is_exact(tmp_path):
    model = sdesim.OUModel(phi=[[-1.0, 0.4], [0.0, -1.0]], sigma=1.0)
    grid = sdesim.TimeGrid(delta=0.01, n_steps=12)
    trajs = sdesim.simulate(model, grid, 5, rng_seed=3)
    path = data.emit_csv(trajs, tmp_path / "out" / "trajectories.csv")
    back = data.ingest_csv(path)
    assert np.array_equal(back.values, trajs.values)
    assert back.grid.n_steps == 12
    assert back.grid.delta == pytest.approx(0.01, rel=1e-12)


def test_emit_gamma_csv(tmp_path):
    grid = sdesim.TimeGrid(delta=0.5, n_steps=2)
    path = data.emit_gamma_csv(np.array([0.0, 0.25, -0.125]), grid, tmp_path / "gamma.csv")  # noqa: E501
    assert path.read_text().splitlines() == ["t,gamma", "0,0", "0.5,0.25", "1,-0.125"]

    with pytest.raises(ValueError) as cm:
        data.emit_gamma_csv(np.zeros(2), grid, tmp_path / "bad.csv")
    assert "gamma path has 2 points, grid has 3" == str(cm.value)


def test_emit_result_json(tmp_path):
    result = lcmtest.TestResult(
        gamma_path=np.zeros(3),
        variance_T=0.5,
        statistic=1.25,
        p_value=0.4,
        query=QuerySpec(0, 1, (1,)),
        level=0.05,
        n_traj=10,
        method="crossfit",
    )
    path = data.emit_result_json(
        result, tmp_path / "result.json", "gamma.csv", {"test": {"K": 3}}, 7
    )
    payload = data.read_json(path)
    assert payload["query"] == {"alpha": 0, "beta": 1, "cond_set": [1]}
    assert payload["statistic"] == 1.25
    assert payload["p_value"] == 0.4
    assert payload["degenerate"] is False
    assert payload["rejected"] is False
    assert payload["gamma_path_file"] == "gamma.csv"
    assert payload["config_echo"] == {"test": {"K": 3}}
    assert payload["seed"] == 7


def test_emit_graph_json(tmp_path):
    edges = np.array([[False, True], [False, False]])
    graph = ligraph.LIGraph(2, edges, np.array([[1.0, 0.01], [0.3, 1.0]]))
    path = data.emit_graph_json(graph, tmp_path / "graph.json", {"seed": 1})
    payload = data.read_json(path)
    assert payload["d"] == 2
    assert payload["edges"] == [[0, 1, 0.01, None]]
    assert payload["seed"] == 1
