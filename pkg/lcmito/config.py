"""
Configuration class. Used to store common functions for parsing a run from a YAML
configuration file into typed settings.
"""

# Imports
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

# Internal imports
from lcmito.constants import (
    DEFAULT_DELTA,
    DEFAULT_DIAG_VALUE,
    DEFAULT_EDGE_PROB,
    DEFAULT_K,
    DEFAULT_LEVEL,
    DEFAULT_N_STEPS,
    DEFAULT_SIGMA,
    DEFAULT_POOL_LAGS,
    DEFAULT_STRIDE,
    DEFAULT_U,
    SUPPORTED_BASELINES,
    SUPPORTED_EXPERIMENT_MODES,
    SUPPORTED_GENERATORS,
    SUPPORTED_RICCATI_METHODS,
)
from lcmito.filtering import QuerySpec
from lcmito.ouest import EstimationConfig
from lcmito.sdesim import TimeGrid
from lcmito.utils import (
    ConfigurationKey,
    _check_key_in_conf,
    _check_no_unknown_keys,
    _check_optional_key_in_conf,
)


NUMBER = [int, float]


##########
# Types  #
##########

@dataclass
class ModelConfig:
    d: int = 10
    edge_prob: float = DEFAULT_EDGE_PROB
    diag_value: float = DEFAULT_DIAG_VALUE
    sigma: float = DEFAULT_SIGMA
    generator: str = "ou"
    diffusion_diag: Optional[List[float]] = None
    phi: Optional[np.ndarray] = None
    phi_beta_alpha: Optional[float] = None
    alpha: int = 0
    beta: int = 1
    n_traj: int = 250


@dataclass
class QueryConfig:
    alpha: int
    beta: int
    cond_set: Optional[List[int]] = None

    def spec(self, d: int) -> QuerySpec:
        """
        The query on d coordinates. Without `cond_set`, C = V∖{α}.
        """
        if self.cond_set is None:
            query = QuerySpec.leave_one_out(self.alpha, self.beta, d)
        else:
            query = QuerySpec(self.alpha, self.beta, tuple(self.cond_set))
        query.check(d)
        return query


@dataclass
class TestConfig:
    K: int = DEFAULT_K
    level: float = DEFAULT_LEVEL
    bonferroni: bool = False
    riccati_method: str = "auto"
    n_splits: int = 1
    crossfit: bool = True

    # Not a test case
    __test__ = False


@dataclass
class ExperimentConfig:
    mode: str = "test"
    repetitions: int = 50
    n_phi: int = 5
    n_traj_grid: List[int] = field(default_factory=lambda: [250])
    phi_beta_alpha_grid: List[float] = field(default_factory=lambda: [0.0])
    delta_grid: Optional[List[float]] = None
    baseline: str = "none"


@dataclass
class RunConfig:
    name: str
    seed: int
    workers: int
    output: Path
    grid: TimeGrid
    model: ModelConfig
    estimation: EstimationConfig
    test: TestConfig
    data: Optional[Path] = None
    query: Optional[QueryConfig] = None
    experiment: Optional[ExperimentConfig] = None
    raw: Dict[str, Any] = field(default_factory=dict)

    def query_spec(self, d: int) -> QuerySpec:
        if self.query is not None:
            return self.query.spec(d)
        return QuerySpec.leave_one_out(self.model.alpha, self.model.beta, d)


#################
# Configuration #
#################

TOP_LEVEL_KEYS = [
    ConfigurationKey("seed", int),
    ConfigurationKey("workers", int),
    ConfigurationKey("output", str),
    ConfigurationKey("data", str),
    ConfigurationKey("grid", dict),
    ConfigurationKey("model", dict),
    ConfigurationKey("estimation", dict),
    ConfigurationKey("query", dict),
    ConfigurationKey("test", dict),
    ConfigurationKey("experiment", dict),
]
GRID_KEYS = [
    ConfigurationKey("delta", NUMBER),
    ConfigurationKey("n_steps", int),
]
MODEL_KEYS = [
    ConfigurationKey("d", int),
    ConfigurationKey("edge_prob", NUMBER),
    ConfigurationKey("diag_value", NUMBER),
    ConfigurationKey("sigma", NUMBER),
    ConfigurationKey("generator", str, SUPPORTED_GENERATORS),
    ConfigurationKey("diffusion_diag", list),
    ConfigurationKey("phi", list),
    ConfigurationKey("phi_beta_alpha", NUMBER),
    ConfigurationKey("alpha", int),
    ConfigurationKey("beta", int),
    ConfigurationKey("n_traj", int),
]
ESTIMATION_KEYS = [
    ConfigurationKey("stride", int),
    ConfigurationKey("u", NUMBER),
    ConfigurationKey("pool_lags", bool),
]
QUERY_KEYS = [
    ConfigurationKey("alpha", int),
    ConfigurationKey("beta", int),
    ConfigurationKey("cond_set", list),
]
TEST_KEYS = [
    ConfigurationKey("K", int),
    ConfigurationKey("level", NUMBER),
    ConfigurationKey("bonferroni", bool),
    ConfigurationKey("riccati_method", str, SUPPORTED_RICCATI_METHODS),
    ConfigurationKey("n_splits", int),
    ConfigurationKey("crossfit", bool),
]
EXPERIMENT_KEYS = [
    ConfigurationKey("mode", str, SUPPORTED_EXPERIMENT_MODES),
    ConfigurationKey("repetitions", int),
    ConfigurationKey("n_phi", int),
    ConfigurationKey("n_traj_grid", list),
    ConfigurationKey("phi_beta_alpha_grid", list),
    ConfigurationKey("delta_grid", list),
    ConfigurationKey("baseline", str, SUPPORTED_BASELINES),
]


def _section(
    conf: Dict[str, Any],
    keys: List[ConfigurationKey],
    name: str,
) -> Dict[str, Any]:
    """
    Validate one section and return the keys that are present and not null
    """
    if conf is None:
        return {}
    _check_no_unknown_keys(conf, keys, name)
    present = {}
    for _k in keys:
        if _check_optional_key_in_conf(_k, conf):
            present[_k.key_name] = conf[_k.key_name]
    return present


def _numbers(values: List[Any], key: str, integer: bool = False) -> List[Any]:
    out = []
    for v in values:
        ok = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok:
            kind = "integers" if integer else "numbers"
            raise ValueError(f"`{key}` must be a list of {kind}, got `{v}`")
        out.append(int(v) if integer else float(v))
    return out


def _positive(value: Any, key: str):
    if value <= 0:
        raise ValueError(f"`{key}` must be positive, got {value}")


class ConfigMixin:

    def parse_grid_conf(self, conf: Optional[Dict[str, Any]]) -> TimeGrid:
        grid = _section(conf or {}, GRID_KEYS, "grid")
        return TimeGrid(
            delta=float(grid.get("delta", DEFAULT_DELTA)),
            n_steps=grid.get("n_steps", DEFAULT_N_STEPS),
        )

    def parse_model_conf(self, conf: Optional[Dict[str, Any]]) -> ModelConfig:
        """
        Parse the `model` section. An explicit `phi` fixes `d`.
        """
        model = _section(conf or {}, MODEL_KEYS, "model")
        out = ModelConfig()
        for key in ["d", "alpha", "beta", "n_traj", "generator"]:
            if key in model:
                setattr(out, key, model[key])
        for key in ["edge_prob", "diag_value", "sigma", "phi_beta_alpha"]:
            if key in model:
                setattr(out, key, float(model[key]))

        if "phi" in model:
            rows = model["phi"]
            if not all(isinstance(r, list) for r in rows):
                raise ValueError("`phi` must be a list of rows")
            phi = np.array([_numbers(r, "phi") for r in rows], dtype=float)
            if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
                raise ValueError(f"`phi` must be square, got shape {phi.shape}")
            if "d" in model and model["d"] != phi.shape[0]:
                raise ValueError(
                    f"`d` ({model['d']}) does not match the size of `phi` ({phi.shape[0]})"  # noqa: E501
                )
            out.phi = phi
            out.d = phi.shape[0]
        if "diffusion_diag" in model:
            out.diffusion_diag = _numbers(model["diffusion_diag"], "diffusion_diag")
            if len(out.diffusion_diag) != out.d:
                raise ValueError(
                    f"`diffusion_diag` has {len(out.diffusion_diag)} entries, expected {out.d}"  # noqa: E501
                )
        if out.generator == "aniso" and out.diffusion_diag is None:
            raise ValueError("`diffusion_diag` is required for the `aniso` generator")

        _positive(out.d, "d")
        _positive(out.n_traj, "n_traj")
        if not 0 <= out.edge_prob <= 1:
            raise ValueError(f"`edge_prob` must lie in [0, 1], got {out.edge_prob}")
        if out.sigma < 0:
            raise ValueError(f"`sigma` must be nonnegative, got {out.sigma}")
        for key in ["alpha", "beta"]:
            if not 0 <= getattr(out, key) < out.d:
                raise ValueError(f"`{key}` must lie in 0..{out.d - 1}")
        if out.alpha == out.beta:
            raise ValueError("`alpha` and `beta` must differ")
        return out

    def parse_estimation_conf(
        self,
        conf: Optional[Dict[str, Any]],
    ) -> EstimationConfig:
        est = _section(conf or {}, ESTIMATION_KEYS, "estimation")
        return EstimationConfig(
            stride=est.get("stride", DEFAULT_STRIDE),
            u=float(est.get("u", DEFAULT_U)),
            pool_lags=est.get("pool_lags", DEFAULT_POOL_LAGS),
        )

    def parse_query_conf(
        self,
        conf: Optional[Dict[str, Any]],
    ) -> Optional[QueryConfig]:
        if conf is None:
            return None
        _check_no_unknown_keys(conf, QUERY_KEYS, "query")
        for _k in QUERY_KEYS[:2]:
            _check_key_in_conf(_k, conf, "query")
        cond_set = None
        if _check_optional_key_in_conf(QUERY_KEYS[2], conf):
            cond_set = _numbers(conf["cond_set"], "cond_set", integer=True)
        return QueryConfig(conf["alpha"], conf["beta"], cond_set)

    def parse_test_conf(self, conf: Optional[Dict[str, Any]]) -> TestConfig:
        test = _section(conf or {}, TEST_KEYS, "test")
        out = TestConfig(**{k: v for k, v in test.items() if k != "level"})
        if "level" in test:
            out.level = float(test["level"])
        if not 0 < out.level < 1:
            raise ValueError(f"`level` must lie in (0, 1), got {out.level}")
        if out.K < 2:
            raise ValueError(f"`K` must be at least 2, got {out.K}")
        _positive(out.n_splits, "n_splits")
        return out

    def parse_experiment_conf(
        self,
        conf: Optional[Dict[str, Any]],
    ) -> Optional[ExperimentConfig]:
        if conf is None:
            return None
        exp = _section(conf, EXPERIMENT_KEYS, "experiment")
        out = ExperimentConfig()
        for key in ["mode", "repetitions", "n_phi", "baseline"]:
            if key in exp:
                setattr(out, key, exp[key])
        if "n_traj_grid" in exp:
            out.n_traj_grid = _numbers(exp["n_traj_grid"], "n_traj_grid", integer=True)
        if "phi_beta_alpha_grid" in exp:
            out.phi_beta_alpha_grid = _numbers(
                exp["phi_beta_alpha_grid"], "phi_beta_alpha_grid"
            )
        if "delta_grid" in exp:
            out.delta_grid = _numbers(exp["delta_grid"], "delta_grid")
            for delta in out.delta_grid:
                _positive(delta, "delta_grid")
        _positive(out.repetitions, "repetitions")
        _positive(out.n_phi, "n_phi")
        if len(out.n_traj_grid) == 0:
            raise ValueError("`n_traj_grid` must not be empty")
        for n in out.n_traj_grid:
            _positive(n, "n_traj_grid")
        return out

    def parse_run_conf(
        self,
        conf: Dict[str, Any],
        name: str,
        wkdir: Path,
    ) -> RunConfig:
        """
        Validate a run configuration and build its typed settings

        args:
            conf: the run's configuration
            name: name of the run
            wkdir: directory containing the configuration file; relative paths are
                resolved against it
        returns:
            RunConfig
        raises:
            ValueError if `conf` is not properly structured
        """
        if not isinstance(conf, dict):
            raise ValueError(f"`{name}`'s configuration must be a mapping")
        _check_no_unknown_keys(conf, TOP_LEVEL_KEYS, name)
        for _k in TOP_LEVEL_KEYS:
            _check_optional_key_in_conf(_k, conf)

        seed = conf["seed"] if conf.get("seed") is not None else 0
        workers = conf["workers"] if conf.get("workers") is not None else 1
        _positive(workers, "workers")
        output = Path(conf.get("output") or "lcmito_output")
        if not output.is_absolute():
            output = Path(wkdir) / output
        data = None
        if conf.get("data") is not None:
            data = Path(conf["data"])
            if not data.is_absolute():
                data = Path(wkdir) / data

        return RunConfig(
            name=name,
            seed=seed,
            workers=workers,
            output=output,
            data=data,
            grid=self.parse_grid_conf(conf.get("grid")),
            model=self.parse_model_conf(conf.get("model")),
            estimation=self.parse_estimation_conf(conf.get("estimation")),
            query=self.parse_query_conf(conf.get("query")),
            test=self.parse_test_conf(conf.get("test")),
            experiment=self.parse_experiment_conf(conf.get("experiment")),
            raw=conf,
        )
