"""
Estimation of the OU drift and diffusion from discretely observed trajectories.

Sampled every δ_c, the OU process is a VAR(1) with X_t = F X_{t-δc} + ε,
F = e^{Φδ_c}. The fit goes:

    F̂ = C_N(-1) C_N(0)^{-1}
    F̄ = U clip(S, [1, 3]) V^T - I            where I + F̂ = U S V^T
    Φ̄ = (2/δ_c)(F̄ - I)(F̄ + I)^{-1}
    Φ̃ = I - U₁ clip(S₁, [1/u, u]) V₁^T        where I - Φ̄ = U₁ S₁ V₁^T
    Ω̂ = residual covariance of the VAR(1) fit, normalized by N_c - d - 1
    vec Σ̂ = (F̂ ⊗ F̂ - I ⊗ I)^{-1} (Φ̃ ⊗ I + I ⊗ Φ̃) vec Ω̂

By default every consecutive δ_c-spaced pair along each trajectory enters the
covariances and the residual sum. With `pool_lags` off only (X_0, X_{δc}) is used, and
the residual sum runs at t = δ_c only.
"""

# Imports
from dataclasses import dataclass
import logging
from typing import Optional, Tuple, Union

import numpy as np

# Internal imports
from lcmito import matcore
from lcmito.constants import (
    DEFAULT_LOGGER_NAME,
    DEFAULT_POOL_LAGS,
    DEFAULT_STRIDE,
    DEFAULT_U,
)
from lcmito.errors import NumericalError
from lcmito.sdesim import TrajectorySet


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


##########
# Types  #
##########

@dataclass(frozen=True)
class EstimationConfig:
    """
    stride: δ_c as a multiple of the observation interval δ
    u: singular-value truncation threshold for (I - Φ̃), must exceed 1
    pool_lags: use every δ_c-spaced pair along each path; off means (X_0, X_{δc}) only
    """
    stride: int = DEFAULT_STRIDE
    u: float = DEFAULT_U
    pool_lags: bool = DEFAULT_POOL_LAGS

    def __post_init__(self):
        if isinstance(self.stride, bool) or not isinstance(self.stride, (int, np.integer)):  # noqa: E501
            raise ValueError(
                f"`stride` is not the correct type...should be a {str(int)}"
            )
        if self.stride < 1:
            raise ValueError(f"`stride` must be positive, got {self.stride}")
        if not np.isfinite(self.u) or self.u <= 1:
            raise ValueError(f"`u` must exceed 1, got {self.u}")

    def delta_c(self, delta: float) -> float:
        return self.stride * delta


@dataclass
class EstimatedOUModel:
    """
    Output of the fit. `sigma_hat` is the diffusion covariance ΣΣ^T recovered through
    the Kronecker identity; `diffusion` is its symmetric square root.
    """
    phi_tilde: np.ndarray
    sigma_hat: np.ndarray
    f_hat: Optional[np.ndarray] = None
    omega_hat: Optional[np.ndarray] = None
    u_used: float = float("inf")
    delta_c: Optional[float] = None
    phi_bar: Optional[np.ndarray] = None
    n_pairs: int = 0

    @property
    def dim(self) -> int:
        return self.phi_tilde.shape[0]

    @property
    def diffusion(self) -> np.ndarray:
        w, V = np.linalg.eigh((self.sigma_hat + self.sigma_hat.T) / 2)
        return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T

    def check_truncation(self, eps: float = 1e-8):
        """
        The singular values of (I - Φ̃) must lie in [1/u, u]
        """
        if not np.isfinite(self.u_used):
            return True
        S = np.linalg.svd(np.eye(self.dim) - self.phi_tilde, compute_uv=False)
        lo, hi = 1.0 / self.u_used, self.u_used
        if S.min() < lo - eps or S.max() > hi + eps:
            raise NumericalError(
                f"singular values of (I - phi_tilde) lie in [{S.min()}, {S.max()}], outside [{lo}, {hi}]"  # noqa: E501
            )
        return True


def known_model(
    phi: np.ndarray,
    diffusion_cov: Union[float, np.ndarray],
) -> EstimatedOUModel:
    """
    Wrap known parameters as an EstimatedOUModel, so the filter and test can run with
    the true model supplied. A scalar `diffusion_cov` means σ²I.
    """
    phi = matcore._as_matrix(phi, "phi", square=True)
    d = phi.shape[0]
    if np.isscalar(diffusion_cov):
        cov = float(diffusion_cov) * np.eye(d)  # type: ignore[arg-type]
    else:
        cov = matcore._as_matrix(diffusion_cov, "diffusion_cov", square=True)
    if cov.shape != phi.shape:
        raise ValueError(
            f"`diffusion_cov` has shape {cov.shape} but the drift matrix has shape {phi.shape}"  # noqa: E501
        )
    return EstimatedOUModel(phi_tilde=phi, sigma_hat=cov)


#############
# Functions #
#############

def _pairs(
    data: TrajectorySet,
    config: EstimationConfig,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    (X_{t-δc}, X_t) pairs as two N_c x d matrices
    """
    if config.stride > data.grid.n_steps:
        raise ValueError(
            f"`stride` ({config.stride}) exceeds the number of grid steps ({data.grid.n_steps})"  # noqa: E501
        )
    if not config.pool_lags:
        return data.values[:, 0, :], data.values[:, config.stride, :]
    sub = data.values[:, ::config.stride, :]
    d = data.dim
    return sub[:, :-1, :].reshape(-1, d), sub[:, 1:, :].reshape(-1, d)


def estimate_F(data: TrajectorySet, config: EstimationConfig) -> np.ndarray:
    """
    F̂ = C_N(-1) C_N(0)^{-1} with C_N(-1) = (1/N_c) Σ X_{δc} X_0^T and
    C_N(0) = (1/N_c) Σ X_0 X_0^T.

    raises:
        ValueError if there are fewer pairs than coordinates
        NumericalError if C_N(0) is ill-conditioned
    """
    prev, nxt = _pairs(data, config)
    n_pairs, d = prev.shape
    if n_pairs < d:
        raise ValueError(
            f"too few trajectories to estimate F: {n_pairs} pairs for dimension {d}"
        )
    c0 = prev.T @ prev / n_pairs
    c_lag = nxt.T @ prev / n_pairs

    # F̂ C0 = C_lag, C0 symmetric
    return matcore.solve(c0, c_lag.T, name="C_N(0)").T


def estimate_phi(
    f_hat: np.ndarray,
    delta_c: float,
    u: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map F̂ to a drift estimate through the Cayley transform, with the two singular-value
    truncations that keep it inside a compact set.

    returns:
        (Φ̃, Φ̄)
    """
    f_hat = matcore._as_matrix(f_hat, "f_hat", square=True)
    if delta_c <= 0:
        raise ValueError(f"`delta_c` must be positive, got {delta_c}")
    if u <= 1:
        raise ValueError(f"`u` must exceed 1, got {u}")
    eye = np.eye(f_hat.shape[0])

    f_bar = matcore.svd_clip(eye + f_hat, 1.0, 3.0) - eye

    # Singular values of (F̄ + I) are in [1, 3], so this solve cannot fail
    plus = f_bar + eye
    assert matcore.condition_number(plus) <= 3.0 + 1e-8
    phi_bar = (2.0 / delta_c) * matcore.solve(plus.T, (f_bar - eye).T, name="(F_bar + I)").T  # noqa: E501

    phi_tilde = eye - matcore.svd_clip(eye - phi_bar, 1.0 / u, u)
    return phi_tilde, phi_bar


def estimate_omega(
    data: TrajectorySet,
    f_hat: np.ndarray,
    config: EstimationConfig,
) -> np.ndarray:
    """
    Residual covariance (1/(N_c - d - 1)) Σ (X_t - F̂X_{t-δc})(X_t - F̂X_{t-δc})^T
    """
    prev, nxt = _pairs(data, config)
    n_pairs, d = prev.shape
    if n_pairs <= d + 1:
        raise ValueError(
            f"too few trajectories to estimate the residual covariance: {n_pairs} pairs, need more than {d + 1}"  # noqa: E501
        )
    resid = nxt - prev @ np.asarray(f_hat).T
    omega = resid.T @ resid / (n_pairs - d - 1)
    return (omega + omega.T) / 2


def estimate_sigma(
    f_hat: np.ndarray,
    phi_tilde: np.ndarray,
    omega_hat: np.ndarray,
) -> np.ndarray:
    """
    Solve vec Σ̂ = (F̂ ⊗ F̂ - I ⊗ I)^{-1} (Φ̃ ⊗ I + I ⊗ Φ̃) vec Ω̂ (column-major vec)
    and symmetrize.

    raises:
        NumericalError if the Kronecker system is near singular, which happens as
        Φ̃ approaches 0
    """
    f_hat = matcore._as_matrix(f_hat, "f_hat", square=True)
    phi_tilde = matcore._as_matrix(phi_tilde, "phi_tilde", square=True)
    omega_hat = matcore._as_matrix(omega_hat, "omega_hat", square=True)
    d = f_hat.shape[0]
    eye = np.eye(d)

    lhs = matcore.kron(f_hat, f_hat) - matcore.kron(eye, eye)
    rhs = (matcore.kron(phi_tilde, eye) + matcore.kron(eye, phi_tilde)) @ omega_hat.flatten(order="F")  # noqa: E501
    if not np.any(rhs):
        return np.zeros((d, d))
    vec_sigma = matcore.solve(lhs, rhs, name="(F ⊗ F - I ⊗ I)")
    sigma = vec_sigma.reshape((d, d), order="F")
    return (sigma + sigma.T) / 2


def fit(data: TrajectorySet, config: EstimationConfig) -> EstimatedOUModel:
    """
    Fit (Φ̃, Σ̂) on `data`. Deterministic given the data and the config.
    """
    delta_c = config.delta_c(data.grid.delta)
    f_hat = estimate_F(data, config)
    phi_tilde, phi_bar = estimate_phi(f_hat, delta_c, config.u)
    omega_hat = estimate_omega(data, f_hat, config)
    sigma_hat = estimate_sigma(f_hat, phi_tilde, omega_hat)

    n_pairs = _pairs(data, config)[0].shape[0]
    model = EstimatedOUModel(
        phi_tilde=phi_tilde,
        sigma_hat=sigma_hat,
        f_hat=f_hat,
        omega_hat=omega_hat,
        u_used=config.u,
        delta_c=delta_c,
        phi_bar=phi_bar,
        n_pairs=n_pairs,
    )
    model.check_truncation()
    DEFAULT_LOGGER.debug(
        f"fitted OU model on {n_pairs} pairs (delta_c={delta_c:g}, u={config.u:g}); "
        f"|phi_tilde|={np.linalg.norm(phi_tilde, 2):.4f}"
    )
    return model
