"""
Trajectory CSV and result JSON I/O.

Trajectory files have the header `traj_id,t,x_1,...,x_d` with one row per
(trajectory, time) sorted by trajectory then time. Floats are written with 17
significant digits so that a write followed by a read reproduces every value exactly.
"""

# Imports
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

# Internal imports
from lcmito.constants import DEFAULT_LOGGER_NAME
from lcmito.sdesim import TimeGrid, TrajectorySet


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


# Float format for lossless round trips
FLOAT_FORMAT = "%.17g"

# Allowed relative deviation of any time step from the grid spacing
GRID_TOLERANCE = 1e-9


def _coordinate_columns(d: int) -> List[str]:
    return [f"x_{i + 1}" for i in range(d)]


def _parse_column(df: pd.DataFrame, column: str) -> np.ndarray:
    """
    Convert a string column to floats, reporting the file line of the first bad cell.
    Line 1 is the header.
    """
    raw = df[column]
    missing = raw.isna() | (raw.astype(str).str.strip() == "")
    if missing.any():
        line = int(np.flatnonzero(missing.to_numpy())[0]) + 2
        raise ValueError(f"line {line}: missing value in column `{column}`")
    numeric = pd.to_numeric(raw, errors="coerce")
    if numeric.isna().any():
        row = int(np.flatnonzero(numeric.isna().to_numpy())[0])
        raise ValueError(
            f"line {row + 2}: non-numeric value `{raw.iloc[row]}` in column `{column}`"
        )
    # Python's float() rounds correctly, so 17-digit cells come back bit-exact
    return np.array([float(v) for v in raw.to_numpy()], dtype=float)


def ingest_csv(path: Union[str, Path]) -> TrajectorySet:
    """
    Read a trajectory CSV into a TrajectorySet.

    args:
        path: CSV file with header `traj_id,t,x_1,...,x_d`
    returns:
        TrajectorySet
    raises:
        ValueError for a bad header, missing or non-numeric cells, ragged,
        interleaved or non-consecutive trajectories, and time grids that are
        non-uniform, mismatched or do not start at t = 0
    """
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"no file found at `{path}`")
    try:
        df = pd.read_csv(
            path, dtype=str, keep_default_na=False, skipinitialspace=True
        )
    except pd.errors.ParserError as e:
        raise ValueError(f"could not parse `{path}`: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise ValueError(f"`{path}` is empty") from e

    columns = list(df.columns)
    if len(columns) < 3 or columns[:2] != ["traj_id", "t"]:
        raise ValueError(
            f"`{path}` header must be `traj_id,t,x_1,...,x_d`, got `{','.join(columns)}`"  # noqa: E501
        )
    d = len(columns) - 2
    if columns[2:] != _coordinate_columns(d):
        raise ValueError(
            f"`{path}` coordinate columns must be {','.join(_coordinate_columns(d))}"
        )
    if len(df) == 0:
        raise ValueError(f"`{path}` has no rows")

    ids_float = _parse_column(df, "traj_id")
    if np.any(ids_float != np.round(ids_float)):
        row = int(np.flatnonzero(ids_float != np.round(ids_float))[0])
        raise ValueError(f"line {row + 2}: `traj_id` must be an integer")
    ids = ids_float.astype(int)
    times = _parse_column(df, "t")
    coords = np.column_stack([_parse_column(df, c) for c in _coordinate_columns(d)])

    # Rows of one trajectory must be contiguous, ids consecutive
    starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
    unique_ids = ids[starts]
    if len(np.unique(unique_ids)) != len(unique_ids):
        seen = set()
        for s, i in zip(starts, unique_ids):
            if i in seen:
                raise ValueError(f"line {s + 2}: trajectory {i} is not contiguous")
            seen.add(i)
    gaps = np.flatnonzero(np.diff(unique_ids) != 1)
    if gaps.size:
        bad = int(gaps[0]) + 1
        raise ValueError(
            f"line {starts[bad] + 2}: trajectory ids must be consecutive, expected {unique_ids[bad - 1] + 1}, got {unique_ids[bad]}"  # noqa: E501
        )

    lengths = np.diff(np.r_[starts, len(ids)])
    if np.any(lengths != lengths[0]):
        bad = int(np.flatnonzero(lengths != lengths[0])[0])
        raise ValueError(
            f"line {starts[bad] + 2}: trajectory {unique_ids[bad]} has {lengths[bad]} rows, expected {lengths[0]}"  # noqa: E501
        )
    n_points = int(lengths[0])
    if n_points < 2:
        raise ValueError("each trajectory needs at least two time points")

    n_traj = len(starts)
    t_grid = times.reshape(n_traj, n_points)
    mismatched = np.any(t_grid != t_grid[0], axis=1)
    if mismatched.any():
        bad = int(np.flatnonzero(mismatched)[0])
        raise ValueError(
            f"line {starts[bad] + 2}: trajectory {unique_ids[bad]} is observed on a different time grid"  # noqa: E501
        )
    steps = np.diff(t_grid[0])
    delta = (t_grid[0, -1] - t_grid[0, 0]) / (n_points - 1)
    if delta <= 0 or np.max(np.abs(steps - delta)) > GRID_TOLERANCE * delta:
        worst = int(np.argmax(np.abs(steps - delta)))
        raise ValueError(
            f"line {worst + 3}: time grid is not uniform (step {steps[worst]!r}, expected {delta!r})"  # noqa: E501
        )
    if abs(t_grid[0, 0]) > GRID_TOLERANCE * delta:
        raise ValueError(
            f"line 2: time grid must start at t = 0, got {float(t_grid[0, 0])!r}"
        )

    grid = TimeGrid(delta=float(delta), n_steps=n_points - 1)
    values = coords.reshape(n_traj, n_points, d)
    DEFAULT_LOGGER.debug(
        f"read {n_traj} trajectories with {n_points} points and d={d} from `{path}`"
    )
    return TrajectorySet(grid=grid, values=values, traj_ids=unique_ids)


def trajectories_to_frame(trajs: TrajectorySet) -> pd.DataFrame:
    n_traj, n_points, d = trajs.values.shape
    assert trajs.traj_ids is not None
    frame = pd.DataFrame(
        trajs.values.reshape(n_traj * n_points, d),
        columns=_coordinate_columns(d),
    )
    frame.insert(0, "t", np.tile(trajs.grid.times, n_traj))
    frame.insert(0, "traj_id", np.repeat(trajs.traj_ids, n_points))
    return frame


def emit_csv(trajs: TrajectorySet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectories_to_frame(trajs).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def emit_gamma_csv(
    gamma_path: np.ndarray,
    grid: TimeGrid,
    path: Union[str, Path],
) -> Path:
    """
    Plot-ready (t, gamma) table with n+1 rows
    """
    path = Path(path)
    if len(gamma_path) != grid.n_steps + 1:
        raise ValueError(
            f"gamma path has {len(gamma_path)} points, grid has {grid.n_steps + 1}"
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"t": grid.times, "gamma": gamma_path}).to_csv(
        path, index=False, float_format=FLOAT_FORMAT
    )
    return path


def emit_table_csv(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def _write_json(payload: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=False)
        f.write("\n")
    return path


def emit_result_json(
    result,
    path: Union[str, Path],
    gamma_path_file: Optional[Union[str, Path]],
    config_echo: Dict[str, Any],
    seed: Optional[int],
) -> Path:
    """
    Write {query, statistic, p_value, variance_T, degenerate, gamma_path_file,
    config_echo, seed}, plus the remaining TestResult fields.
    """
    payload = result.to_dict()
    payload["gamma_path_file"] = str(gamma_path_file) if gamma_path_file else None
    payload["config_echo"] = config_echo
    payload["seed"] = seed
    return _write_json(payload, path)


def emit_graph_json(
    graph,
    path: Union[str, Path],
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write {d, edges: [[from, to, p_value, weight], ...]}
    """
    payload = graph.to_dict()
    if extra:
        payload.update(extra)
    return _write_json(payload, path)


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)
