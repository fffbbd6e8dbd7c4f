"""
The local covariance measure test of α ↛ β | C.

For held-out trajectories, with Π̂ and μ̂ from the filter run under a drift fitted on
other trajectories:

    Ĝ_t = X_α(t) - Π̂_t
    M̂ increments = ΔX_β - δ μ̂
    γ̂_{kδ} = (1/N) Σ_j Σ_{l≤k} Ĝ_{j,(l-1)δ} ΔM̂_{j,lδ}
    V̂_t = ‖Σ̂_β‖² (1/N) Σ_j Σ_{l≤t/δ} Ĝ²_{j,(l-1)δ} δ
    T̂ = √N sup_t |γ̂_t| / √V̂_T

Under the null √N γ̂ / √V̂_T behaves like a Brownian motion on [0, T], so the p-value
is the survival function of sup_{[0,T]} |W|.
"""

# Imports
from dataclasses import dataclass, field
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

from joblib import Parallel, delayed
import numpy as np
from scipy import optimize, stats
from sklearn.model_selection import KFold

# Internal imports
from lcmito import filtering, ouest
from lcmito.constants import (
    DEFAULT_LOGGER_NAME,
    DEGENERATE_VARIANCE,
    SERIES_TERM_TOL,
)
from lcmito.filtering import QuerySpec
from lcmito.sdesim import TimeGrid, TrajectorySet


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


# Above this standardized level the reflected-normal series is used for the tail
_SERIES_SWITCH = 2.0
_MAX_SERIES_TERMS = 10_000


##########
# Types  #
##########

@dataclass
class FoldPartition:
    """
    `assignments[j]` is the fold (0-based) holding trajectory j
    """
    assignments: np.ndarray
    K: int

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=int)
        if self.K < 1:
            raise ValueError(f"`K` must be positive, got {self.K}")
        if self.assignments.size and (
            self.assignments.min() < 0 or self.assignments.max() >= self.K
        ):
            raise ValueError("fold assignments must lie in 0..K-1")

    @property
    def n_traj(self) -> int:
        return int(self.assignments.size)

    def fold(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == k)

    def complement(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != k)

    @property
    def sizes(self) -> List[int]:
        return [int(np.sum(self.assignments == k)) for k in range(self.K)]


@dataclass
class TestResult:
    gamma_path: np.ndarray
    variance_T: float
    statistic: float
    p_value: float
    degenerate_variance: bool = False
    query: Optional[QuerySpec] = None
    level: Optional[float] = None
    n_traj: int = 0
    method: str = "single"
    weight: Optional[float] = None
    per_fold: Optional[List[Dict[str, Any]]] = field(default=None)

    # Not a test case
    __test__ = False

    @property
    def rejected(self) -> bool:
        if self.level is None:
            raise ValueError("no significance level attached to this result")
        return self.p_value < self.level

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "method": self.method,
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "variance_T": float(self.variance_T),
            "degenerate": bool(self.degenerate_variance),
            "n_traj": int(self.n_traj),
        }
        if self.query is not None:
            out["query"] = {
                "alpha": self.query.alpha,
                "beta": self.query.beta,
                "cond_set": list(self.query.cond_set),
            }
        if self.level is not None:
            out["level"] = float(self.level)
            out["rejected"] = self.rejected
        if self.weight is not None:
            out["weight"] = float(self.weight)
        if self.per_fold is not None:
            out["per_fold"] = self.per_fold
        return out


##########################
# LCM path and variance  #
##########################

def _as_paths(values) -> np.ndarray:
    if isinstance(values, TrajectorySet):
        return values.values
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise ValueError(f"trajectories must be 3-D, got shape {arr.shape}")
    return arr


def residual_paths(eval_trajs, pi_hat: np.ndarray, query: QuerySpec) -> np.ndarray:
    """
    Ĝ = X_α - Π̂, shape (N, n+1)
    """
    X = _as_paths(eval_trajs)
    pi = np.atleast_2d(np.asarray(pi_hat, dtype=float))
    if pi.shape != X.shape[:2]:
        raise ValueError(f"`pi_hat` has shape {pi.shape}, expected {X.shape[:2]}")
    return X[:, :, query.alpha] - pi


def lcm_from_residuals(
    g_hat: np.ndarray,
    x_beta: np.ndarray,
    mu_hat: np.ndarray,
    delta: float,
) -> np.ndarray:
    """
    γ̂ over the grid from residuals Ĝ, the observed β coordinate and μ̂, all (N, n+1).
    γ̂_0 = 0.
    """
    g = np.atleast_2d(np.asarray(g_hat, dtype=float))
    xb = np.atleast_2d(np.asarray(x_beta, dtype=float))
    mu = np.atleast_2d(np.asarray(mu_hat, dtype=float))
    if not (g.shape == xb.shape == mu.shape):
        raise ValueError(
            f"shape mismatch: residuals {g.shape}, beta paths {xb.shape}, drifts {mu.shape}"  # noqa: E501
        )
    d_m = np.diff(xb, axis=1) - delta * mu[:, :-1]
    increments = np.mean(g[:, :-1] * d_m, axis=0)
    return np.concatenate([[0.0], np.cumsum(increments)])


def compute_lcm(
    eval_trajs,
    pi_hat: np.ndarray,
    mu_hat: np.ndarray,
    query: QuerySpec,
    grid: TimeGrid,
) -> np.ndarray:
    """
    γ̂ at every grid point. The martingale increments are built from X_β.

    args:
        eval_trajs: TrajectorySet or (N, n+1, d) array, disjoint from the fit data
        pi_hat: (N, n+1) filtered projection of X_α
        mu_hat: (N, n+1) filtered drift of X_β
        query: the query
        grid: time grid
    returns:
        (n+1,) array
    """
    X = _as_paths(eval_trajs)
    if X.shape[1] != grid.n_steps + 1:
        raise ValueError(f"trajectories have {X.shape[1]} points, grid has {grid.n_steps + 1}")  # noqa: E501
    g = residual_paths(X, pi_hat, query)
    return lcm_from_residuals(g, X[:, :, query.beta], mu_hat, grid.delta)


def compute_variance(
    sigma_hat_row_beta: np.ndarray,
    g_hat: np.ndarray,
    grid: TimeGrid,
) -> np.ndarray:
    """
    V̂_t = ‖Σ̂_β‖² (1/N) Σ_j ∫_0^t Ĝ²_j ds with a left-endpoint sum. V̂_0 = 0.
    """
    row = np.atleast_1d(np.asarray(sigma_hat_row_beta, dtype=float))
    g = np.atleast_2d(np.asarray(g_hat, dtype=float))
    if g.shape[1] != grid.n_steps + 1:
        raise ValueError(f"residual paths have {g.shape[1]} points, grid has {grid.n_steps + 1}")  # noqa: E501
    scale = float(row @ row)
    increments = np.mean(g[:, :-1] ** 2, axis=0) * grid.delta
    return scale * np.concatenate([[0.0], np.cumsum(increments)])


##################################
# Supremum of |W| on [0, T]      #
##################################

def _check_horizon(horizon: float):
    if not np.isfinite(horizon) or horizon <= 0:
        raise ValueError(f"`horizon` must be positive, got {horizon}")


def _cdf_theta_series(z: float) -> float:
    # P(sup_{[0,1]} |W| ≤ z) = (4/π) Σ_i (-1)^i/(2i+1) exp(-π²(2i+1)²/(8z²))
    total = 0.0
    c = np.pi ** 2 / (8.0 * z * z)
    for i in range(_MAX_SERIES_TERMS):
        k = 2 * i + 1
        total += (-1) ** i * np.exp(-c * k * k) / k
        nxt = np.exp(-c * (k + 2) ** 2) / (k + 2)
        if 4.0 / np.pi * nxt < SERIES_TERM_TOL:
            break
    return 4.0 / np.pi * total


def _sf_normal_series(z: float) -> float:
    # P(sup_{[0,1]} |W| > z) = 4 Σ_m (-1)^m Φ̄((2m+1)z)
    total = 0.0
    for m in range(_MAX_SERIES_TERMS):
        total += (-1) ** m * stats.norm.sf((2 * m + 1) * z)
        if 4.0 * stats.norm.sf((2 * m + 3) * z) < SERIES_TERM_TOL * max(total, 1e-300):
            break
    return 4.0 * total


def sup_brownian_cdf(x: float, horizon: float) -> float:
    """
    P(sup_{0≤t≤T} |W_t| ≤ x). Zero for x ≤ 0.
    """
    _check_horizon(horizon)
    if x <= 0:
        return 0.0
    z = x / np.sqrt(horizon)
    if z > _SERIES_SWITCH:
        value = 1.0 - _sf_normal_series(z)
    else:
        value = _cdf_theta_series(z)
    return float(np.clip(value, 0.0, 1.0))


def sup_brownian_sf(x: float, horizon: float) -> float:
    """
    P(sup_{0≤t≤T} |W_t| > x), accurate in the far tail
    """
    _check_horizon(horizon)
    if x <= 0:
        return 1.0
    z = x / np.sqrt(horizon)
    if z > _SERIES_SWITCH:
        value = _sf_normal_series(z)
    else:
        value = 1.0 - _cdf_theta_series(z)
    return float(np.clip(value, 0.0, 1.0))


def sup_brownian_quantile(level: float, horizon: float) -> float:
    """
    The `level`-quantile of sup_{[0,T]} |W|. Solved on the unit horizon and scaled by
    √T.
    """
    if not 0 < level < 1:
        raise ValueError(f"`level` must lie in (0, 1), got {level}")
    _check_horizon(horizon)

    def f(z: float) -> float:
        return sup_brownian_cdf(z, 1.0) - level

    lo, hi = 1e-3, 4.0
    while f(hi) < 0:
        hi *= 2.0
    z_star = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    if abs(f(z_star)) > 1e-10:
        raise ValueError(f"quantile search did not converge for level {level}")
    return float(np.sqrt(horizon) * z_star)


#########
# Tests #
#########

def _finalize(
    gamma: np.ndarray,
    variance_T: float,
    n_traj: int,
    horizon: float,
    query: QuerySpec,
    level: float,
    method: str,
    statistic: Optional[float] = None,
    weight: Optional[float] = None,
    per_fold: Optional[List[Dict[str, Any]]] = None,
) -> TestResult:
    degenerate = not variance_T > DEGENERATE_VARIANCE
    if degenerate:
        DEFAULT_LOGGER.warning(
            f"degenerate variance ({variance_T:.3e}) for query alpha={query.alpha}, "
            f"beta={query.beta}; reporting p-value 1"
        )
        stat, p_value = 0.0, 1.0
    else:
        if statistic is None:
            statistic = np.sqrt(n_traj) * np.max(np.abs(gamma)) / np.sqrt(variance_T)
        stat = float(statistic)
        p_value = sup_brownian_sf(stat, horizon)
    return TestResult(
        gamma_path=gamma,
        variance_T=float(variance_T),
        statistic=stat,
        p_value=p_value,
        degenerate_variance=degenerate,
        query=query,
        level=level,
        n_traj=n_traj,
        method=method,
        weight=weight,
        per_fold=per_fold,
    )


def _check_level(level: float):
    if not 0 < level < 1:
        raise ValueError(f"`level` must lie in (0, 1), got {level}")


def _evaluate(
    model: ouest.EstimatedOUModel,
    eval_data: TrajectorySet,
    query: QuerySpec,
    riccati_method: str,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    (γ̂ path, V̂ path) of `model` on `eval_data`
    """
    grid = eval_data.grid
    paths = filtering.run_filter(
        model.phi_tilde, eval_data.values, query, grid, riccati_method
    )
    g_hat = residual_paths(eval_data, paths.pi_hat, query)
    gamma = lcm_from_residuals(
        g_hat, eval_data.values[:, :, query.beta], paths.mu_hat, grid.delta
    )
    variance = compute_variance(model.diffusion[query.beta], g_hat, grid)
    return gamma, variance


def run_test(
    data: TrajectorySet,
    query: QuerySpec,
    split: Tuple[Sequence[int], Sequence[int]],
    est_config: ouest.EstimationConfig,
    level: float,
    model: Optional[ouest.EstimatedOUModel] = None,
    riccati_method: str = "auto",
) -> TestResult:
    """
    Single-split test: fit on the first index set, evaluate on the second.

    args:
        data: all trajectories
        query: the query
        split: (train indices, eval indices), disjoint and nonempty
        est_config: estimation settings
        level: significance level
        model: fitted (or true) model to use instead of fitting on the train split
        riccati_method: passed to the filter
    returns:
        TestResult
    """
    _check_level(level)
    query.check(data.dim)
    train, evaluation = (np.asarray(s, dtype=int) for s in split)
    if evaluation.size == 0 or (model is None and train.size == 0):
        raise ValueError("train and evaluation splits must be nonempty")
    if np.intersect1d(train, evaluation).size:
        raise ValueError("train and evaluation splits overlap")

    if model is None:
        model = ouest.fit(data.subset(train), est_config)
    eval_data = data.subset(evaluation)
    gamma, variance = _evaluate(model, eval_data, query, riccati_method)
    return _finalize(
        gamma,
        variance[-1],
        eval_data.n_traj,
        data.grid.horizon,
        query,
        level,
        method="single",
        weight=float(model.phi_tilde[query.beta, query.alpha]),
    )


def make_folds(n_traj: int, K: int, rng_seed: int) -> FoldPartition:
    """
    Seeded shuffle into K folds whose sizes differ by at most one
    """
    if K < 2:
        raise ValueError(f"`K` must be at least 2, got {K}")
    if n_traj < K:
        raise ValueError(f"cannot split {n_traj} trajectories into {K} folds")
    kfold = KFold(n_splits=K, shuffle=True, random_state=int(rng_seed) % (2 ** 32))
    assignments = np.empty(n_traj, dtype=int)
    for k, (_, idx) in enumerate(kfold.split(np.arange(n_traj))):
        assignments[idx] = k
    return FoldPartition(assignments=assignments, K=K)


def half_split(n_traj: int, rng_seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Seeded split into a training half and an evaluation half (the larger one on odd
    counts)
    """
    if n_traj < 2:
        raise ValueError(f"cannot split {n_traj} trajectories into two halves")
    perm = np.random.default_rng(rng_seed).permutation(n_traj)
    half = n_traj // 2
    return perm[:half], perm[half:]


def _map(fn, items: Sequence[Any], workers: int) -> List[Any]:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return Parallel(n_jobs=workers, backend="threading")(
        delayed(fn)(item) for item in items
    )


def crossfit_models(
    data: TrajectorySet,
    folds: FoldPartition,
    est_config: ouest.EstimationConfig,
    workers: int = 1,
) -> List[ouest.EstimatedOUModel]:
    """
    One model per fold k, fitted on every trajectory outside fold k
    """
    if folds.n_traj != data.n_traj:
        raise ValueError(
            f"fold partition covers {folds.n_traj} trajectories, data has {data.n_traj}"
        )
    DEFAULT_LOGGER.debug(f"fitting {folds.K} cross-fit models, fold sizes {folds.sizes}")  # noqa: E501
    return _map(
        lambda k: ouest.fit(data.subset(folds.complement(k)), est_config),
        list(range(folds.K)),
        workers,
    )


def run_crossfit_test(
    data: TrajectorySet,
    query: QuerySpec,
    K: int,
    est_config: ouest.EstimationConfig,
    level: float,
    rng_seed: int,
    workers: int = 1,
    models: Optional[List[ouest.EstimatedOUModel]] = None,
    folds: Optional[FoldPartition] = None,
    riccati_method: str = "auto",
) -> TestResult:
    """
    K-fold cross-fitted test. For every fold k the model fitted outside fold k is
    evaluated on fold k; then γ̂_K is the mean of the fold paths, V̂_K(T) the mean of
    the fold variances, and T̂_K = √(N₀ / V̂_K(T)) max_l |γ̂_K(lδ)|.

    args:
        data: all N₀ trajectories
        query: the query
        K: number of folds, at least 2 and at most N₀ / 2
        est_config: estimation settings
        level: significance level
        rng_seed: seed of the fold shuffle
        workers: folds evaluated concurrently
        models: per-fold models from `crossfit_models`, reused across queries
        folds: the partition `models` were fitted on
        riccati_method: passed to the filter
    returns:
        TestResult
    """
    _check_level(level)
    query.check(data.dim)
    if isinstance(K, bool) or not isinstance(K, (int, np.integer)):
        raise ValueError(f"`K` is not the correct type...should be a {str(int)}")
    if K < 2:
        raise ValueError(f"`K` must be at least 2, got {K}")
    n0 = data.n_traj
    if n0 < 2 * K:
        raise ValueError(f"`K` ({K}) exceeds half the number of trajectories ({n0})")

    if folds is None:
        folds = make_folds(n0, K, rng_seed)
    elif folds.K != K or folds.n_traj != n0:
        raise ValueError("fold partition does not match `K` and the data")
    if models is None:
        models = crossfit_models(data, folds, est_config, workers)
    elif len(models) != K:
        raise ValueError(f"expected {K} cross-fit models, got {len(models)}")

    def _fold(k: int):
        return _evaluate(models[k], data.subset(folds.fold(k)), query, riccati_method)

    per_fold_paths = _map(_fold, list(range(K)), workers)
    gammas = np.stack([g for g, _ in per_fold_paths])
    variances = np.array([v[-1] for _, v in per_fold_paths])

    gamma_K = gammas.mean(axis=0)
    variance_K = float(variances.mean())
    per_fold = [
        {
            "fold": k,
            "n_eval": size,
            "variance_T": float(variances[k]),
            "sup_gamma": float(np.max(np.abs(gammas[k]))),
        }
        for k, size in enumerate(folds.sizes)
    ]
    statistic = None
    if variance_K > DEGENERATE_VARIANCE:
        statistic = np.sqrt(n0 / variance_K) * np.max(np.abs(gamma_K))
    weight = float(np.mean([m.phi_tilde[query.beta, query.alpha] for m in models]))
    return _finalize(
        gamma_K,
        variance_K,
        n0,
        data.grid.horizon,
        query,
        level,
        method="crossfit",
        statistic=statistic,
        weight=weight,
        per_fold=per_fold,
    )


def granger_test(
    data: TrajectorySet,
    query: QuerySpec,
    stride: int,
    level: float = 0.05,
) -> TestResult:
    """
    Granger baseline on the VAR(1) link: regress X_β(t) on X_{C∪{α}}(t - δ_c) over every
    stride-spaced pair and F-test the α coefficient.
    """
    _check_level(level)
    query.check(data.dim)
    if stride < 1 or stride > data.grid.n_steps:
        raise ValueError(f"`stride` must lie in 1..{data.grid.n_steps}, got {stride}")
    regressors = [query.alpha, *query.cond_set]
    sub = data.values[:, ::stride, :]
    X = sub[:, :-1, :][:, :, regressors].reshape(-1, len(regressors))
    y = sub[:, 1:, query.beta].reshape(-1)
    n_obs, p = X.shape
    if n_obs <= p:
        raise ValueError(f"too few pairs ({n_obs}) for {p} regressors")

    def rss(design: np.ndarray) -> float:
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ coef
        return float(resid @ resid)

    rss_full = rss(X)
    rss_restricted = rss(X[:, 1:])
    dof = n_obs - p
    sigma2 = rss_full / dof
    if not sigma2 > DEGENERATE_VARIANCE:
        return _finalize(
            np.zeros(0), sigma2, data.n_traj, data.grid.horizon, query, level, "granger"
        )
    f_stat = max(rss_restricted - rss_full, 0.0) / sigma2
    result = TestResult(
        gamma_path=np.zeros(0),
        variance_T=sigma2,
        statistic=float(f_stat),
        p_value=float(stats.f.sf(f_stat, 1, dof)),
        query=query,
        level=level,
        n_traj=data.n_traj,
        method="granger",
    )
    return result
