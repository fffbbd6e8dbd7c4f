"""
Optimal filtering for the OU model with the coordinates in C observed and those in
U = V∖C hidden. With m_t = E[X_U(t) | F_t] and y_t = Var[X_U(t) | F_t] / σ²:

    dm_t = (A_t X_C + B_t m_t) dt + C_t dX_C
    ẏ_t = Φ_U y_t + y_t Φ_U^T + I - y_t Φ_{C,U}^T Φ_{C,U} y_t

    A_t = Φ_{U,C} - y_t Φ_{C,U}^T Φ_C
    B_t = Φ_U - y_t Φ_{C,U}^T Φ_{C,U}
    C_t = y_t Φ_{C,U}^T

started from the stationary Gaussian X_0 ~ N(0, σ²Υ), Υ = (I - Φ)^{-1}(I - Φ^T)^{-1}.

Only this OU specialization is implemented. The general filtering equation for
arbitrary Itô drifts is not closed and has no counterpart here.
"""

# Imports
from dataclasses import dataclass
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

# Internal imports
from lcmito import matcore
from lcmito.constants import (
    COND_LIMIT,
    DEFAULT_LOGGER_NAME,
    SUPPORTED_RICCATI_METHODS,
)
from lcmito.errors import NumericalError
from lcmito.sdesim import TimeGrid


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


##########
# Types  #
##########

@dataclass(frozen=True)
class QuerySpec:
    """
    Is β locally independent of α given C? Requires β ∈ C, α ∉ C, α ≠ β.
    """
    alpha: int
    beta: int
    cond_set: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cond_set", tuple(int(c) for c in self.cond_set))
        if self.alpha == self.beta:
            raise ValueError(f"`alpha` and `beta` must differ, got {self.alpha}")
        if self.beta not in self.cond_set:
            raise ValueError(f"`beta` ({self.beta}) must be in the conditioning set")
        if self.alpha in self.cond_set:
            raise ValueError(
                f"`alpha` ({self.alpha}) must not be in the conditioning set"
            )
        if len(set(self.cond_set)) != len(self.cond_set):
            raise ValueError("conditioning set has repeated coordinates")

    @classmethod
    def leave_one_out(cls, alpha: int, beta: int, d: int) -> "QuerySpec":
        """
        The query that defines local independence graph edges: C = V∖{α}
        """
        return cls(alpha, beta, tuple(i for i in range(d) if i != alpha))

    def check(self, d: int):
        for idx in (self.alpha, self.beta, *self.cond_set):
            if not 0 <= idx < d:
                raise ValueError(f"coordinate {idx} out of range for dimension {d}")

    def unobserved(self, d: int) -> Tuple[int, ...]:
        return tuple(i for i in range(d) if i not in self.cond_set)

    def alpha_position(self, d: int) -> int:
        unobs = self.unobserved(d)
        if self.alpha not in unobs:
            raise ValueError(f"`alpha` ({self.alpha}) is not an unobserved coordinate")
        return unobs.index(self.alpha)


@dataclass
class RiccatiPath:
    """
    Scaled conditional covariance y_t at every grid point, shape (n+1, p, p)
    """
    y: np.ndarray
    method: str = "integrate"

    def __post_init__(self):
        if self.y.ndim != 3 or self.y.shape[1] != self.y.shape[2]:
            raise ValueError(f"Riccati path must have shape (n+1, p, p), got {self.y.shape}")  # noqa: E501
        if not np.all(np.isfinite(self.y)):
            raise NumericalError("Riccati path has non-finite values")
        asym = np.max(np.abs(self.y - np.swapaxes(self.y, 1, 2)))
        if asym > 1e-9 * max(1.0, float(np.max(np.abs(self.y)))):
            raise NumericalError(f"Riccati path is not symmetric (max asymmetry {asym:.3e})")  # noqa: E501
        min_eig = float(np.min(np.linalg.eigvalsh(self.y)))
        if min_eig < -1e-8:
            raise NumericalError(f"Riccati path lost positive semi-definiteness (eigenvalue {min_eig:.3e})")  # noqa: E501


@dataclass
class FilterPaths:
    """
    m_hat: (N, n+1, p); pi_hat, mu_hat: (N, n+1)
    """
    m_hat: np.ndarray
    pi_hat: np.ndarray
    mu_hat: np.ndarray
    riccati: Optional[RiccatiPath] = None


@dataclass(frozen=True)
class _Blocks:
    phi_u: np.ndarray
    phi_uc: np.ndarray
    phi_cu: np.ndarray
    phi_c: np.ndarray


def _blocks(phi: np.ndarray, query: QuerySpec) -> _Blocks:
    d = phi.shape[0]
    query.check(d)
    U = list(query.unobserved(d))
    C = list(query.cond_set)
    return _Blocks(
        phi_u=phi[np.ix_(U, U)],
        phi_uc=phi[np.ix_(U, C)],
        phi_cu=phi[np.ix_(C, U)],
        phi_c=phi[np.ix_(C, C)],
    )


#############
# Functions #
#############

def initial_values(
    phi: np.ndarray,
    query: QuerySpec,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gaussian conditioning of X_0 ~ N(0, Υ) on X_C(0).

    returns:
        (m0_coef, y0) with m_0 = m0_coef @ X_C(0) and
        y0 = Υ_U - Υ_{U,C} Υ_C^{-1} Υ_{C,U}
    """
    phi = matcore._as_matrix(phi, "phi", square=True)
    d = phi.shape[0]
    query.check(d)
    U = list(query.unobserved(d))
    C = list(query.cond_set)

    inv = matcore.solve(np.eye(d) - phi, np.eye(d), name="(I - phi)")
    upsilon = inv @ inv.T
    ups_c = upsilon[np.ix_(C, C)]
    ups_uc = upsilon[np.ix_(U, C)]
    m0_coef = matcore.solve(ups_c, ups_uc.T, name="Upsilon_C").T
    y0 = upsilon[np.ix_(U, U)] - m0_coef @ ups_uc.T
    return m0_coef, (y0 + y0.T) / 2


def _check_y0(y0: np.ndarray):
    if y0.ndim != 2 or y0.shape[0] != y0.shape[1]:
        raise ValueError(f"`y0` must be square, got shape {y0.shape}")
    if np.max(np.abs(y0 - y0.T), initial=0.0) > 1e-9 * max(1.0, float(np.max(np.abs(y0)))):  # noqa: E501
        raise ValueError("`y0` must be symmetric")
    if float(np.min(np.linalg.eigvalsh(y0))) < -1e-8:
        raise ValueError("`y0` must be positive semi-definite")


def _integrate_riccati(
    A: np.ndarray,
    S: np.ndarray,
    y0: np.ndarray,
    times: np.ndarray,
) -> np.ndarray:
    p = A.shape[0]
    eye = np.eye(p)

    def rhs(_t, flat):
        y = flat.reshape(p, p)
        y = (y + y.T) / 2
        return (A @ y + y @ A.T + eye - y @ S @ y).ravel()

    sol = solve_ivp(
        rhs,
        (float(times[0]), float(times[-1])),
        y0.ravel(),
        method="DOP853",
        t_eval=times,
        rtol=1e-11,
        atol=1e-12,
        max_step=min(float(times[1] - times[0]), 1e-2) if len(times) > 1 else np.inf,
    )
    if sol.status != 0 or sol.y.shape[1] != len(times) or not np.all(np.isfinite(sol.y)):  # noqa: E501
        reached = sol.t[-1] if sol.t.size > 0 else times[0]
        raise NumericalError(f"Riccati solution blew up before t={reached:g}: {sol.message}")  # noqa: E501
    y = sol.y.T.reshape(len(times), p, p)
    return (y + np.swapaxes(y, 1, 2)) / 2


def _hamiltonian_riccati(
    A: np.ndarray,
    S: np.ndarray,
    y0: np.ndarray,
    times: np.ndarray,
) -> np.ndarray:
    """
    Negative-exponential solution. With the Hamiltonian
        M = [[-A^T, S], [I, A]]
    diagonalized as W^{-1} M W = diag(Λ₊, Λ₋), Re Λ₊ > 0 > Re Λ₋,
        y_t = (W21 + W22 X_t)(W11 + W12 X_t)^{-1},  X_t = e^{tΛ₋} R e^{-tΛ₊},
        R = -(W22 - y0 W12)^{-1}(W21 - y0 W11).
    Both exponentials decay, so the formula is stable over long horizons.

    raises:
        NumericalError if M has eigenvalues on the imaginary axis or is not
        diagonalizable
    """
    p = A.shape[0]
    M = np.block([[-A.T, S], [np.eye(p), A]])
    w, W = np.linalg.eig(M)
    scale = max(1.0, float(np.linalg.norm(M)))
    if np.min(np.abs(w.real)) < 1e-8 * scale:
        raise NumericalError("Hamiltonian has eigenvalues on the imaginary axis")
    order = np.argsort(-w.real)
    w, W = w[order], W[:, order]
    if np.sum(w.real > 0) != p:
        raise NumericalError("Hamiltonian spectrum is not split evenly")
    cond = float(np.linalg.cond(W))
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        raise NumericalError(
            f"Hamiltonian is not diagonalizable (eigenvector condition number {cond:.3e})",  # noqa: E501
            condition=cond,
        )
    lam_pos, lam_neg = w[:p], w[p:]
    W11, W12 = W[:p, :p], W[:p, p:]
    W21, W22 = W[p:, :p], W[p:, p:]

    R = -np.linalg.solve(W22 - y0 @ W12, W21 - y0 @ W11)
    out = np.empty((len(times), p, p))
    for k, t in enumerate(times):
        X = np.exp(t * lam_neg)[:, None] * R * np.exp(-t * lam_pos)[None, :]
        num = W21 + W22 @ X
        den = W11 + W12 @ X
        y = np.linalg.solve(den.T, num.T).T
        if np.max(np.abs(y.imag), initial=0.0) > 1e-8 * max(1.0, float(np.max(np.abs(y.real)))):  # noqa: E501
            raise NumericalError("closed-form Riccati solution is not real")
        out[k] = (y.real + y.real.T) / 2
    return out


def solve_riccati(
    phi: np.ndarray,
    y0: np.ndarray,
    query: QuerySpec,
    grid: TimeGrid,
    method: str = "auto",
) -> RiccatiPath:
    """
    Solve the Riccati equation for y_t on every grid point.

    args:
        phi: drift matrix
        y0: symmetric PSD initial value
        query: defines the observed set C
        grid: time grid
        method: `integrate` (DOP853 with tight tolerances), `hamiltonian` (closed
            form) or `auto` (closed form for a scalar unobserved block, integration
            otherwise or when the closed form does not apply)
    returns:
        RiccatiPath
    """
    if method not in SUPPORTED_RICCATI_METHODS:
        raise ValueError(f"Unsupported value `{method}` for key `riccati_method`")
    phi = matcore._as_matrix(phi, "phi", square=True)
    y0 = np.asarray(y0, dtype=float)
    _check_y0(y0)
    blocks = _blocks(phi, query)
    A = blocks.phi_u
    S = blocks.phi_cu.T @ blocks.phi_cu
    if y0.shape != A.shape:
        raise ValueError(f"`y0` has shape {y0.shape}, expected {A.shape}")
    times = grid.times

    if method == "integrate":
        return RiccatiPath(_integrate_riccati(A, S, y0, times), "integrate")
    if method == "hamiltonian":
        return RiccatiPath(_hamiltonian_riccati(A, S, y0, times), "hamiltonian")

    if A.shape[0] == 1:
        try:
            return RiccatiPath(_hamiltonian_riccati(A, S, y0, times), "hamiltonian")
        except (NumericalError, np.linalg.LinAlgError) as e:
            DEFAULT_LOGGER.warning(f"closed-form Riccati unavailable ({e}); integrating")  # noqa: E501
    return RiccatiPath(_integrate_riccati(A, S, y0, times), "integrate")


def filter_coefficients(
    phi: np.ndarray,
    riccati: RiccatiPath,
    query: QuerySpec,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    A_t, B_t, C_t at every grid point. They depend on Φ and C only, so one set serves
    every trajectory.

    returns:
        (A (n+1, p, c), B (n+1, p, p), C (n+1, p, c))
    """
    blocks = _blocks(np.asarray(phi, dtype=float), query)
    y = riccati.y
    gain = y @ blocks.phi_cu.T
    A = blocks.phi_uc[None, :, :] - gain @ blocks.phi_c
    B = blocks.phi_u[None, :, :] - gain @ blocks.phi_cu
    return A, B, gain


def forward_filter(
    phi: np.ndarray,
    riccati: RiccatiPath,
    traj_xc: np.ndarray,
    query: QuerySpec,
    grid: TimeGrid,
    m0: np.ndarray,
) -> np.ndarray:
    """
    Euler-Maruyama recursion for the conditional mean, coefficients at the left end
    of each step:
        m_k = m_{k-1} + (A_{k-1} X_{C,k-1} + B_{k-1} m_{k-1}) δ
              + C_{k-1}(X_{C,k} - X_{C,k-1})

    args:
        phi: drift matrix (estimated or true)
        riccati: y_t over the grid
        traj_xc: observed paths, (N, n+1, |C|) or a single (n+1, |C|) path
        query: the query
        grid: time grid
        m0: initial conditional means, (N, p) or (p,)
    returns:
        m_hat with the same leading shape as `traj_xc`
    """  # noqa: E501
    xc = np.asarray(traj_xc, dtype=float)
    single = xc.ndim == 2
    if single:
        xc = xc[None, :, :]
    m_init = np.atleast_2d(np.asarray(m0, dtype=float))
    n = grid.n_steps
    if xc.shape[1] != n + 1:
        raise ValueError(f"observed paths have {xc.shape[1]} points, grid has {n + 1}")
    if riccati.y.shape[0] != n + 1:
        raise ValueError(
            f"Riccati path has {riccati.y.shape[0]} points, grid has {n + 1}"
        )
    A, B, C = filter_coefficients(phi, riccati, query)
    if xc.shape[2] != A.shape[2]:
        raise ValueError(
            f"observed paths have {xc.shape[2]} coordinates, conditioning set has {A.shape[2]}"  # noqa: E501
        )
    p = A.shape[1]
    if m_init.shape != (xc.shape[0], p):
        raise ValueError(f"`m0` has shape {m_init.shape}, expected ({xc.shape[0]}, {p})")  # noqa: E501

    delta = grid.delta
    m = np.empty((xc.shape[0], n + 1, p))
    m[:, 0, :] = m_init
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n + 1):
            x_prev = xc[:, k - 1, :]
            m_prev = m[:, k - 1, :]
            drift = x_prev @ A[k - 1].T + m_prev @ B[k - 1].T
            m[:, k, :] = m_prev + delta * drift + (xc[:, k, :] - x_prev) @ C[k - 1].T
    if not np.all(np.isfinite(m)):
        raise NumericalError("filtered conditional mean has non-finite values")
    return m[0] if single else m


def projections(
    m_hat: np.ndarray,
    traj_xc: np.ndarray,
    phi: np.ndarray,
    query: QuerySpec,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Π̂ is the α-coordinate of m̂; μ̂ = Φ_{β,U} m̂ + Φ_{β,C} X_C.

    returns:
        (pi_hat, mu_hat), each with the leading shape of `m_hat` minus the last axis
    """
    phi = np.asarray(phi, dtype=float)
    d = phi.shape[0]
    pos = query.alpha_position(d)
    U = list(query.unobserved(d))
    C = list(query.cond_set)
    m_hat = np.asarray(m_hat, dtype=float)
    xc = np.asarray(traj_xc, dtype=float)
    if m_hat.shape[-1] != len(U) or xc.shape[-1] != len(C):
        raise ValueError("filtered means or observed paths do not match the query")
    pi_hat = m_hat[..., pos]
    mu_hat = m_hat @ phi[query.beta, U] + xc @ phi[query.beta, C]
    return pi_hat, mu_hat


def run_filter(
    phi: np.ndarray,
    values: np.ndarray,
    query: QuerySpec,
    grid: TimeGrid,
    method: str = "auto",
) -> FilterPaths:
    """
    Filter every trajectory in `values` (N, n+1, d) with drift `phi`
    """
    phi = matcore._as_matrix(phi, "phi", square=True)
    C = list(query.cond_set)
    xc = np.asarray(values, dtype=float)[:, :, C]
    m0_coef, y0 = initial_values(phi, query)
    riccati = solve_riccati(phi, y0, query, grid, method)
    m0 = xc[:, 0, :] @ m0_coef.T
    m_hat = forward_filter(phi, riccati, xc, query, grid, m0)
    pi_hat, mu_hat = projections(m_hat, xc, phi, query)
    DEFAULT_LOGGER.debug(
        f"filtered {xc.shape[0]} paths for query alpha={query.alpha}, beta={query.beta} "  # noqa: E501
        f"(Riccati via {riccati.method})"
    )
    return FilterPaths(m_hat=m_hat, pi_hat=pi_hat, mu_hat=mu_hat, riccati=riccati)


def coordinates_in_order(
    m_hat: np.ndarray,
    xc: np.ndarray,
    query: QuerySpec,
    d: int,
) -> np.ndarray:
    """
    Reassemble (m̂, X_C) into the original coordinate order
    """
    out = np.empty(m_hat.shape[:-1] + (d,))
    U: Sequence[int] = query.unobserved(d)
    out[..., list(U)] = m_hat
    out[..., list(query.cond_set)] = xc
    return out
