"""
Monte Carlo experiment runner for the synthetic protocol: draw `n_phi` random drift
matrices, simulate `repetitions` datasets per matrix and setting, and report rejection
rates (mode `test`) or graph recovery metrics (mode `discovery`).

Every run gets its own seeds, derived from (run seed, setting, replicate, repetition),
so the table does not depend on how runs are scheduled across workers.
"""

# Imports
from dataclasses import dataclass
import logging
from typing import Any, Callable, Dict, List, Optional

from joblib import Parallel, delayed
import numpy as np
import pandas as pd

# Internal imports
from lcmito import lcmtest, ligraph, sdesim
from lcmito.config import ExperimentConfig, ModelConfig, TestConfig
from lcmito.constants import DEFAULT_LOGGER_NAME
from lcmito.errors import NumericalError
from lcmito.filtering import QuerySpec
from lcmito.ouest import EstimationConfig
from lcmito.utils import derive_seed


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


# Seed stream tags
_PHI_TAG = 0
_DATA_TAG = 1
_FOLD_TAG = 2
_SPLIT_TAG = 3


@dataclass
class ExperimentResult:
    """
    `runs` has one row per simulated dataset; `table` aggregates it per setting
    """
    runs: pd.DataFrame
    table: pd.DataFrame


@dataclass(frozen=True)
class _Job:
    delta_idx: int
    delta: float
    n_steps: int
    n_traj: int
    n_traj_idx: int
    value: Optional[float]
    value_idx: int
    replicate: int
    repetition: int


def replicate_phi(model: ModelConfig, seed: int, replicate: int) -> np.ndarray:
    """
    The replicate-th drift matrix of an experiment. An explicit `phi` is reused for
    every replicate.
    """
    if model.phi is not None:
        return np.array(model.phi, dtype=float)
    return sdesim.gen_random_phi(
        model.d,
        model.edge_prob,
        model.diag_value,
        derive_seed(seed, _PHI_TAG, replicate),
    )


def _simulate(
    phi: np.ndarray,
    model: ModelConfig,
    grid: sdesim.TimeGrid,
    n_traj: int,
    seed: int,
) -> sdesim.TrajectorySet:
    ou = sdesim.OUModel(phi=phi, sigma=model.sigma)
    return sdesim.simulate(
        ou,
        grid,
        n_traj,
        seed,
        generator=model.generator,
        diffusion_diag=model.diffusion_diag,
    )


def _grids(base: sdesim.TimeGrid, experiment: ExperimentConfig) -> List[sdesim.TimeGrid]:  # noqa: E501
    """
    One grid per δ in `delta_grid`, keeping the horizon of `base` as close as the
    step allows
    """
    if not experiment.delta_grid:
        return [base]
    grids = []
    for delta in experiment.delta_grid:
        n_steps = max(int(round(base.horizon / delta)), 1)
        if abs(n_steps * delta - base.horizon) > 1e-9 * base.horizon:
            DEFAULT_LOGGER.debug(
                f"delta={delta} gives horizon {n_steps * delta:g} instead of {base.horizon:g}"  # noqa: E501
            )
        grids.append(sdesim.TimeGrid(delta=delta, n_steps=n_steps))
    return grids


def _jobs(
    grids: List[sdesim.TimeGrid],
    experiment: ExperimentConfig,
    with_values: bool,
) -> List[_Job]:
    values: List[Optional[float]] = (
        list(experiment.phi_beta_alpha_grid) if with_values else [None]
    )
    return [
        _Job(di, g.delta, g.n_steps, n, ni, v, vi, r, rep)
        for di, g in enumerate(grids)
        for ni, n in enumerate(experiment.n_traj_grid)
        for vi, v in enumerate(values)
        for r in range(experiment.n_phi)
        for rep in range(experiment.repetitions)
    ]


def _run_jobs(
    jobs: List[_Job],
    fn: Callable[[_Job], Dict[str, Any]],
    workers: int,
) -> List[Dict[str, Any]]:
    def _safe(job: _Job) -> Dict[str, Any]:
        base = {
            "delta": job.delta,
            "n_traj": job.n_traj,
            "replicate": job.replicate,
            "repetition": job.repetition,
        }
        if job.value is not None:
            base["phi_beta_alpha"] = job.value
        try:
            base.update(fn(job))
            base["failed"] = False
        except NumericalError as e:
            DEFAULT_LOGGER.warning(
                f"run (replicate={job.replicate}, repetition={job.repetition}) failed: {e}"  # noqa: E501
            )
            base["failed"] = True
        return base

    if workers > 1:
        return Parallel(n_jobs=workers, backend="threading")(
            delayed(_safe)(job) for job in jobs
        )
    return [_safe(job) for job in jobs]


def _frame(records: List[Dict[str, Any]], columns: List[str]) -> pd.DataFrame:
    """
    Runs as a frame; metric columns exist even when every run failed
    """
    frame = pd.DataFrame(records)
    for column in columns:
        if column not in frame.columns:
            frame[column] = np.nan
    return frame


def _test_table(runs: pd.DataFrame, method: str, with_baseline: bool) -> pd.DataFrame:
    """
    Pooled rejection rate and the mean of per-replicate rates for every setting
    """
    keys = ["delta", "n_traj", "phi_beta_alpha"]
    ok = runs[~runs["failed"]]
    rows = []
    for setting, group in runs.groupby(keys, sort=True):
        done = ok.loc[group.index.intersection(ok.index)]
        rejected = done["rejected"].astype(float)
        row = dict(zip(keys, setting))
        row["metric"] = "type_i" if row["phi_beta_alpha"] == 0 else "recall"
        row["method"] = method
        row["runs"] = len(group)
        row["failed"] = int(group["failed"].sum())
        row["degenerate"] = int(done["degenerate"].astype(bool).sum())
        row["rate_pooled"] = float(rejected.mean()) if len(done) else np.nan
        per_phi = rejected.groupby(done["replicate"]).mean()
        row["rate_per_phi_mean"] = float(per_phi.mean()) if len(per_phi) else np.nan
        if with_baseline:
            granger = done["granger_rejected"].astype(float)
            row["granger_rate"] = float(granger.mean()) if len(done) else np.nan
        rows.append(row)
    return pd.DataFrame(rows)


def run_test_experiment(
    model: ModelConfig,
    grid: sdesim.TimeGrid,
    est_config: EstimationConfig,
    test: TestConfig,
    experiment: ExperimentConfig,
    seed: int,
    workers: int = 1,
) -> ExperimentResult:
    """
    Rejection rates of the test of α ↛ β | V∖{α} with Φ_{βα} planted at each value of
    `phi_beta_alpha_grid`. A zero value gives the type-I error rate. The test is
    cross-fitted over `test.K` folds, or run on a single seeded half split when
    `test.crossfit` is off.
    """
    grids = _grids(grid, experiment)
    jobs = _jobs(grids, experiment, with_values=True)
    method = "crossfit" if test.crossfit else "single"
    with_baseline = experiment.baseline == "granger"
    query = QuerySpec.leave_one_out(model.alpha, model.beta, model.d)
    DEFAULT_LOGGER.info(f"running {len(jobs)} test experiment run(s) ({method})")

    def _one(job: _Job) -> Dict[str, Any]:
        phi = replicate_phi(model, seed, job.replicate)
        assert job.value is not None
        phi = sdesim.plant_edge(phi, model.alpha, model.beta, job.value)
        data_seed = derive_seed(
            seed, _DATA_TAG, job.delta_idx, job.n_traj_idx, job.value_idx,
            job.replicate, job.repetition,
        )
        run_grid = sdesim.TimeGrid(delta=job.delta, n_steps=job.n_steps)
        data = _simulate(phi, model, run_grid, job.n_traj, data_seed)
        if test.crossfit:
            result = lcmtest.run_crossfit_test(
                data,
                query,
                test.K,
                est_config,
                test.level,
                derive_seed(data_seed, _FOLD_TAG),
                riccati_method=test.riccati_method,
            )
        else:
            result = lcmtest.run_test(
                data,
                query,
                lcmtest.half_split(job.n_traj, derive_seed(data_seed, _SPLIT_TAG)),
                est_config,
                test.level,
                riccati_method=test.riccati_method,
            )
        row = {
            "method": result.method,
            "statistic": result.statistic,
            "p_value": result.p_value,
            "rejected": result.rejected,
            "degenerate": result.degenerate_variance,
        }
        if with_baseline:
            granger = lcmtest.granger_test(data, query, est_config.stride, test.level)
            row["granger_p_value"] = granger.p_value
            row["granger_rejected"] = granger.rejected
        return row

    columns = ["method", "statistic", "p_value", "rejected", "degenerate"]
    if with_baseline:
        columns += ["granger_p_value", "granger_rejected"]
    runs = _frame(_run_jobs(jobs, _one, workers), columns)
    return ExperimentResult(runs=runs, table=_test_table(runs, method, with_baseline))


def run_discovery_experiment(
    model: ModelConfig,
    grid: sdesim.TimeGrid,
    est_config: EstimationConfig,
    test: TestConfig,
    experiment: ExperimentConfig,
    seed: int,
    workers: int = 1,
) -> ExperimentResult:
    """
    Precision, recall and F1 of the recovered graph against the true one
    """
    grids = _grids(grid, experiment)
    jobs = _jobs(grids, experiment, with_values=False)
    DEFAULT_LOGGER.info(f"running {len(jobs)} discovery experiment run(s)")

    def _one(job: _Job) -> Dict[str, Any]:
        phi = replicate_phi(model, seed, job.replicate)
        data_seed = derive_seed(
            seed, _DATA_TAG, job.delta_idx, job.n_traj_idx, 0,
            job.replicate, job.repetition,
        )
        run_grid = sdesim.TimeGrid(delta=job.delta, n_steps=job.n_steps)
        data = _simulate(phi, model, run_grid, job.n_traj, data_seed)
        graph = ligraph.recover_lig(
            data,
            test.K,
            est_config,
            test.level,
            derive_seed(data_seed, _FOLD_TAG),
            bonferroni=test.bonferroni,
            riccati_method=test.riccati_method,
        )
        truth = ligraph.true_graph(phi)
        precision, recall, f1 = ligraph.edge_metrics(graph, truth)
        return {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "shd": ligraph.shd(graph, truth),
            "degenerate": int(np.sum(graph.degenerate)),
            "failed_pairs": len(graph.failed_pairs()),
        }

    runs = _frame(
        _run_jobs(jobs, _one, workers),
        ["precision", "recall", "f1", "shd", "degenerate", "failed_pairs"],
    )
    ok = runs[~runs["failed"]]
    table = (
        runs.groupby(["delta", "n_traj"], sort=True)
        .agg(runs=("failed", "size"), failed=("failed", "sum"))
        .join(
            ok.groupby(["delta", "n_traj"], sort=True)[
                ["precision", "recall", "f1", "shd", "degenerate", "failed_pairs"]
            ].mean()
        )
        .reset_index()
    )
    return ExperimentResult(runs=runs, table=table)


def run_experiment(
    model: ModelConfig,
    grid: sdesim.TimeGrid,
    est_config: EstimationConfig,
    test: TestConfig,
    experiment: ExperimentConfig,
    seed: int,
    workers: int = 1,
) -> ExperimentResult:
    if experiment.mode == "discovery":
        return run_discovery_experiment(
            model, grid, est_config, test, experiment, seed, workers
        )
    return run_test_experiment(model, grid, est_config, test, experiment, seed, workers)
