"""
Synthetic data for the local independence test: random drift matrices, initial values
from the linear structural equation model, and Euler-Maruyama trajectories for the
multivariate Ornstein-Uhlenbeck process dX = ΦX dt + σ dW and its nonlinear and
anisotropic variants.

Random streams are keyed by (seed, trajectory index, stream tag) through numpy's
SeedSequence and the counter-based Philox bit generator, so a trajectory's values do
not depend on how trajectories are chunked or scheduled.

Note on the drift matrix: the identifiability discussion asks for (I - Φ) positive
definite, while the synthetic protocol puts 2 on the diagonal of Φ, which makes the
diagonal of (I - Φ) negative. Only nonsingularity of (I - Φ) is needed to draw the
initial values, so that is all we check.
"""

# Imports
from dataclasses import dataclass, field
import logging
from typing import Callable, List, Optional, Sequence, Union

from joblib import Parallel, delayed
import numpy as np

# Internal imports
from lcmito import matcore
from lcmito.constants import (
    COND_LIMIT,
    DEFAULT_LOGGER_NAME,
    MAX_PHI_DRAWS,
    SUPPORTED_GENERATORS,
)
from lcmito.errors import NumericalError


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


# Stream tags
_INITIAL_STREAM = 0
_NOISE_STREAM = 1

# Trajectories simulated per vectorized block
_CHUNK_SIZE = 1024


##########
# Types  #
##########

@dataclass(frozen=True)
class TimeGrid:
    """
    Uniform grid {0, δ, ..., nδ}. The horizon T = nδ is derived, never stored.
    """
    delta: float
    n_steps: int

    def __post_init__(self):
        if isinstance(self.n_steps, bool) or not isinstance(self.n_steps, (int, np.integer)):  # noqa: E501
            raise ValueError(
                f"`n_steps` is not the correct type...should be a {str(int)}"
            )
        if self.n_steps < 1:
            raise ValueError(f"`n_steps` must be positive, got {self.n_steps}")
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise ValueError(f"`delta` must be positive, got {self.delta}")

    @property
    def horizon(self) -> float:
        return self.n_steps * self.delta

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.delta


@dataclass
class OUModel:
    """
    Isometric OU model dX = ΦX dt + σ dW with X_0 = (I - Φ)^{-1} e, e ~ N(0, σ²I)
    """
    phi: np.ndarray
    sigma: float

    def __post_init__(self):
        self.phi = matcore._as_matrix(self.phi, "phi", square=True)
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"`sigma` must be nonnegative, got {self.sigma}")
        cond = matcore.condition_number(np.eye(self.dim) - self.phi)
        if cond >= COND_LIMIT:
            raise NumericalError(
                f"(I - phi) is singular or ill-conditioned (condition number {cond:.3e})",  # noqa: E501
                condition=cond,
            )

    @property
    def dim(self) -> int:
        return self.phi.shape[0]


@dataclass
class TrajectorySet:
    """
    N₀ sample paths observed on a uniform grid. `values` is indexed
    (trajectory, step, coordinate).
    """
    grid: TimeGrid
    values: np.ndarray
    traj_ids: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3:
            raise ValueError(
                f"trajectory values must be 3-D (trajectory, step, coordinate), got shape {self.values.shape}"  # noqa: E501
            )
        if self.values.shape[1] != self.grid.n_steps + 1:
            raise ValueError(
                f"trajectory values have {self.values.shape[1]} time points but the grid has {self.grid.n_steps + 1}"  # noqa: E501
            )
        if self.values.shape[0] < 1 or self.values.shape[2] < 1:
            raise ValueError("trajectory set must hold at least one path and coordinate")  # noqa: E501
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(
                f"non-finite value at trajectory {bad[0]}, step {bad[1]}, coordinate {bad[2]}"  # noqa: E501
            )
        if self.traj_ids is None:
            self.traj_ids = np.arange(self.values.shape[0])

    @property
    def n_traj(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def subset(self, indices: Sequence[int]) -> "TrajectorySet":
        idx = np.asarray(indices, dtype=int)
        assert self.traj_ids is not None
        return TrajectorySet(
            grid=self.grid,
            values=self.values[idx],
            traj_ids=self.traj_ids[idx],
        )


#############
# Functions #
#############

def _stream(*keys: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(k) for k in keys]))
    )


def gen_random_phi(
    d: int,
    edge_prob: float,
    diag_value: float,
    rng_seed: int,
) -> np.ndarray:
    """
    Draw a drift matrix: each off-diagonal entry is nonzero with probability
    `edge_prob`, nonzero values are Uniform(0, 1), and the diagonal is `diag_value`.
    Draws with (nearly) singular (I - Φ) are rejected and redrawn.

    args:
        d: dimension
        edge_prob: probability that an off-diagonal entry is nonzero
        diag_value: value of every diagonal entry
        rng_seed: seed
    returns:
        d x d drift matrix
    raises:
        NumericalError after MAX_PHI_DRAWS consecutive singular draws
    """
    if d < 1:
        raise ValueError(f"`d` must be positive, got {d}")
    if not 0 <= edge_prob <= 1:
        raise ValueError(f"`edge_prob` must lie in [0, 1], got {edge_prob}")

    for attempt in range(MAX_PHI_DRAWS):
        rng = _stream(rng_seed, attempt)
        mask = rng.random((d, d)) < edge_prob
        weights = rng.uniform(0.0, 1.0, size=(d, d))
        phi = np.where(mask, weights, 0.0)
        np.fill_diagonal(phi, diag_value)
        cond = matcore.condition_number(np.eye(d) - phi)
        if cond < COND_LIMIT:
            return phi
        DEFAULT_LOGGER.debug(
            f"drift draw {attempt} rejected; (I - phi) condition number {cond:.3e}"
        )
    raise NumericalError(
        f"{MAX_PHI_DRAWS} consecutive drift draws had singular (I - phi)"
    )


def plant_edge(phi: np.ndarray, alpha: int, beta: int, value: float) -> np.ndarray:
    """
    Return a copy of `phi` with Φ_{βα} (the effect of α on β's drift) set to `value`
    """
    out = np.array(phi, dtype=float, copy=True)
    d = out.shape[0]
    if not (0 <= alpha < d and 0 <= beta < d) or alpha == beta:
        raise ValueError(
            f"`alpha` and `beta` must be distinct coordinates in [0, {d}), got {alpha}, {beta}"  # noqa: E501
        )
    out[beta, alpha] = value
    return out


def _initial_values(
    phi: np.ndarray,
    scale: np.ndarray,
    n_traj: int,
    rng_seed: int,
) -> np.ndarray:
    d = phi.shape[0]
    e = np.stack([
        _stream(rng_seed, j, _INITIAL_STREAM).standard_normal(d) for j in range(n_traj)
    ]) if n_traj > 0 else np.zeros((0, d))
    e = e * scale
    if not np.any(e):
        return np.zeros((n_traj, d))
    # Rows are (I - Φ)^{-1} e_j
    return matcore.solve(np.eye(d) - phi, e.T, name="(I - phi)").T


def sample_initial(model: OUModel, n_traj: int, rng_seed: int) -> np.ndarray:
    """
    Draw X_0 from the linear SEM X_0 = (I - Φ)^{-1} e, e ~ N(0, σ²I), which is
    N(0, σ²(I - Φ)^{-1}(I - Φ^T)^{-1}).

    returns:
        n_traj x d matrix of initial values
    """
    if n_traj < 1:
        raise ValueError(f"`n_traj` must be positive, got {n_traj}")
    scale = np.full(model.dim, model.sigma)
    return _initial_values(model.phi, scale, n_traj, rng_seed)


def _check_x0(x0, n_traj: int, d: int) -> np.ndarray:
    arr = np.asarray(x0, dtype=float)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (n_traj, arr.shape[0]))
    if arr.shape != (n_traj, d):
        raise ValueError(
            f"`x0` must have shape ({n_traj}, {d}) or ({d},), got {np.shape(x0)}"
        )
    return np.array(arr)


def _initial_or_given(
    model: OUModel,
    n_traj: int,
    rng_seed: int,
    x0: Optional[np.ndarray],
) -> np.ndarray:
    if x0 is None:
        return sample_initial(model, n_traj, rng_seed)
    return _check_x0(x0, n_traj, model.dim)


def _noise(
    rng_seed: int,
    traj_indices: np.ndarray,
    n_steps: int,
    d: int,
) -> np.ndarray:
    return np.stack([
        _stream(rng_seed, j, _NOISE_STREAM).standard_normal((n_steps, d))
        for j in traj_indices
    ])


def _integrate_chunk(
    x0: np.ndarray,
    step: Callable[[np.ndarray, np.ndarray], np.ndarray],
    noise: np.ndarray,
    n_steps: int,
) -> np.ndarray:
    out = np.empty((x0.shape[0], n_steps + 1, x0.shape[1]))
    out[:, 0, :] = x0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            out[:, k + 1, :] = step(out[:, k, :], noise[:, k, :])
    return out


def _run(
    x0: np.ndarray,
    step: Callable[[np.ndarray, np.ndarray], np.ndarray],
    grid: TimeGrid,
    rng_seed: int,
    workers: int = 1,
) -> TrajectorySet:
    """
    Forward `step` from `x0` over the grid, chunk by chunk. Chunks are independent
    (each trajectory owns its noise stream), so they can be farmed out to threads.
    """
    n_traj, d = x0.shape
    starts = list(range(0, n_traj, _CHUNK_SIZE))

    def _do_chunk(start: int) -> np.ndarray:
        idx = np.arange(start, min(start + _CHUNK_SIZE, n_traj))
        noise = _noise(rng_seed, idx, grid.n_steps, d)
        return _integrate_chunk(x0[idx], step, noise, grid.n_steps)

    if workers > 1 and len(starts) > 1:
        chunks: List[np.ndarray] = Parallel(n_jobs=workers, backend="threading")(
            delayed(_do_chunk)(s) for s in starts
        )
    else:
        chunks = [_do_chunk(s) for s in starts]
    values = np.concatenate(chunks, axis=0)

    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.all(np.isfinite(values), axis=2))
        j, k = int(bad[0][0]), int(bad[0][1])
        raise NumericalError(
            f"simulation overflowed at trajectory {j}, step {k} (t={k * grid.delta:g})"
        )
    return TrajectorySet(grid=grid, values=values)


def simulate_ou(
    model: OUModel,
    grid: TimeGrid,
    n_traj: int,
    rng_seed: int,
    workers: int = 1,
    x0: Optional[np.ndarray] = None,
) -> TrajectorySet:
    """
    Euler-Maruyama paths X_{k+1} = X_k + δΦX_k + σ√δ Z_k started from the SEM
    """
    x0 = _initial_or_given(model, n_traj, rng_seed, x0)
    phi_t = model.phi.T
    delta = grid.delta
    noise_scale = model.sigma * np.sqrt(delta)

    def step(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return x + delta * (x @ phi_t) + noise_scale * z

    return _run(x0, step, grid, rng_seed, workers)


def simulate_nonlinear(
    model: OUModel,
    grid: TimeGrid,
    n_traj: int,
    rng_seed: int,
    workers: int = 1,
    x0: Optional[np.ndarray] = None,
) -> TrajectorySet:
    """
    Euler-Maruyama paths of dX = Φ{X + sin(2πX)} dt + σ dW, sine taken elementwise
    """
    x0 = _initial_or_given(model, n_traj, rng_seed, x0)
    phi_t = model.phi.T
    delta = grid.delta
    noise_scale = model.sigma * np.sqrt(delta)

    def step(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return x + delta * ((x + np.sin(2 * np.pi * x)) @ phi_t) + noise_scale * z

    return _run(x0, step, grid, rng_seed, workers)


def simulate_aniso(
    phi: np.ndarray,
    diffusion_diag: Union[Sequence[float], np.ndarray],
    grid: TimeGrid,
    n_traj: int,
    rng_seed: int,
    workers: int = 1,
    x0: Optional[np.ndarray] = None,
) -> TrajectorySet:
    """
    Euler-Maruyama paths of dX = ΦX dt + Σ dW with diagonal Σ. The SEM noise uses the
    same per-coordinate scales, so equal scales reproduce `simulate_ou` exactly.
    """
    phi = matcore._as_matrix(phi, "phi", square=True)
    scales = np.asarray(diffusion_diag, dtype=float)
    if scales.ndim != 1 or scales.shape[0] != phi.shape[0]:
        raise ValueError(
            f"`diffusion_diag` has length {scales.size} but the drift matrix has dimension {phi.shape[0]}"  # noqa: E501
        )
    if np.any(scales <= 0) or not np.all(np.isfinite(scales)):
        raise ValueError("`diffusion_diag` entries must be positive")
    if n_traj < 1:
        raise ValueError(f"`n_traj` must be positive, got {n_traj}")

    if x0 is None:
        x0 = _initial_values(phi, scales, n_traj, rng_seed)
    else:
        x0 = _check_x0(x0, n_traj, phi.shape[0])
    phi_t = phi.T
    delta = grid.delta
    noise_scale = scales * np.sqrt(delta)

    def step(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return x + delta * (x @ phi_t) + noise_scale * z

    return _run(x0, step, grid, rng_seed, workers)


def exact_transition(model: OUModel, delta: float):
    """
    Exact one-step law of the OU process: X_{t+δ} | X_t ~ N(F X_t, Q) with F = e^{Φδ}
    and Q = ∫_0^δ e^{Φs} σ² e^{Φ^T s} ds, the latter from Van Loan's block exponential.

    returns:
        (F, Q)
    """
    d = model.dim
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = -model.phi
    block[:d, d:] = model.sigma ** 2 * np.eye(d)
    block[d:, d:] = model.phi.T
    E = matcore.mat_exp(block, delta)
    F = E[d:, d:].T
    Q = F @ E[:d, d:]
    return F, (Q + Q.T) / 2


def simulate_exact(
    model: OUModel,
    grid: TimeGrid,
    n_traj: int,
    rng_seed: int,
    workers: int = 1,
    x0: Optional[np.ndarray] = None,
) -> TrajectorySet:
    """
    Paths drawn from the exact OU transition law (no discretization bias). Used as an
    oracle generator.
    """
    x0 = _initial_or_given(model, n_traj, rng_seed, x0)
    F, Q = exact_transition(model, grid.delta)
    w, V = np.linalg.eigh(Q)
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    F_t = F.T

    def step(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return x @ F_t + z @ root

    return _run(x0, step, grid, rng_seed, workers)


def simulate(
    model: OUModel,
    grid: TimeGrid,
    n_traj: int,
    rng_seed: int,
    generator: str = "ou",
    diffusion_diag: Optional[Sequence[float]] = None,
    workers: int = 1,
) -> TrajectorySet:
    """
    Dispatch to the generator named by `generator`
    """
    if generator not in SUPPORTED_GENERATORS:
        raise ValueError(f"Unsupported value `{generator}` for key `generator`")
    DEFAULT_LOGGER.debug(
        f"simulating {n_traj} paths with generator `{generator}`, d={model.dim}, "
        f"delta={grid.delta}, n_steps={grid.n_steps}"
    )
    if generator == "ou":
        return simulate_ou(model, grid, n_traj, rng_seed, workers)
    elif generator == "exact":
        return simulate_exact(model, grid, n_traj, rng_seed, workers)
    elif generator == "nonlinear":
        return simulate_nonlinear(model, grid, n_traj, rng_seed, workers)
    if diffusion_diag is None:
        raise ValueError("`diffusion_diag` is required for the `aniso` generator")
    return simulate_aniso(model.phi, diffusion_diag, grid, n_traj, rng_seed, workers)
