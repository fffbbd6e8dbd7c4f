"""
Dense linear algebra used by the estimation and filtering pipeline: matrix
exponential, singular-value clipping, Kronecker products and checked solves.

All functions are pure; they never mutate their inputs.
"""

# Imports
import logging

import numpy as np
import scipy.linalg

# Internal imports
from lcmito.constants import (
    COND_LIMIT,
    DEFAULT_LOGGER_NAME,
)
from lcmito.errors import NumericalError


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


# Functions
def _as_matrix(A, name: str = "A", square: bool = False) -> np.ndarray:
    """
    Coerce `A` to a 2-D float array and check that every entry is finite

    raises:
        ValueError if `A` is not 2-D, not square (when required) or not finite
    """
    arr = np.asarray(A, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"`{name}` must be a 2-D matrix, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValueError(f"`{name}` must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"`{name}` has non-finite entries")
    return arr


def mat_exp(A, t: float = 1.0) -> np.ndarray:
    """
    exp(tA) via scaling and squaring with a Padé approximant (scipy's `expm`), which
    is accurate to about machine precision relative to ‖exp(tA)‖.

    args:
        A: square matrix
        t: real scalar
    returns:
        exp(tA)
    """
    arr = _as_matrix(A, square=True)
    if not np.isfinite(t):
        raise ValueError("`t` must be finite")
    out = scipy.linalg.expm(float(t) * arr)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"matrix exponential overflowed at t={t}")
    return out


def svd_clip(A, lo: float, hi: float) -> np.ndarray:
    """
    Clamp the singular values of `A` into [lo, hi] and rebuild the matrix with the
    same singular vectors.

    args:
        A: matrix
        lo: lower singular-value bound
        hi: upper singular-value bound
    returns:
        U clip(S) V^T
    """
    arr = _as_matrix(A)
    if lo > hi:
        raise ValueError(f"`lo` ({lo}) must not exceed `hi` ({hi})")
    if lo <= 0:
        raise ValueError(f"`lo` must be positive, got {lo}")
    U, S, Vt = np.linalg.svd(arr, full_matrices=False)
    S_clipped = np.clip(S, lo, hi)
    out = (U * S_clipped) @ Vt

    # Recompute the spectrum of the output
    eps = 1e-10 * hi
    S_out = np.linalg.svd(out, compute_uv=False)
    if S_out.min() < lo - eps or S_out.max() > hi + eps:
        raise NumericalError(
            f"singular-value clipping into [{lo}, {hi}] failed; output spectrum is "
            f"[{S_out.min()}, {S_out.max()}]"
        )
    return out


def kron(A, B) -> np.ndarray:
    """
    Kronecker product A ⊗ B
    """
    return np.kron(_as_matrix(A, "A"), _as_matrix(B, "B"))


def condition_number(A) -> float:
    arr = _as_matrix(A, square=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = float(np.linalg.cond(arr))
    if not np.isfinite(cond):
        return float("inf")
    return cond


def solve(A, B, name: str = "A") -> np.ndarray:
    """
    Solve A X = B for a well-conditioned square `A`.

    args:
        A: square matrix with condition number below COND_LIMIT
        B: matrix (or vector) right-hand side
        name: label used in error messages
    returns:
        X
    raises:
        NumericalError if `A` is singular or ill-conditioned, or the residual check
        fails
    """
    arr = _as_matrix(A, name, square=True)
    rhs = np.asarray(B, dtype=float)
    if rhs.shape[0] != arr.shape[0]:
        raise ValueError(
            f"right-hand side has {rhs.shape[0]} rows but `{name}` has {arr.shape[0]}"
        )
    if not np.all(np.isfinite(rhs)):
        raise ValueError("right-hand side has non-finite entries")

    cond = condition_number(arr)
    if cond >= COND_LIMIT:
        raise NumericalError(
            f"`{name}` is singular or ill-conditioned (condition number {cond:.3e})",
            condition=cond,
        )
    # One step of iterative refinement on the LU factors
    lu_piv = scipy.linalg.lu_factor(arr)
    X = scipy.linalg.lu_solve(lu_piv, rhs)
    X = X + scipy.linalg.lu_solve(lu_piv, rhs - arr @ X)

    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm > 0:
        residual = np.linalg.norm(arr @ X - rhs) / rhs_norm
        if residual > 1e-10:
            raise NumericalError(
                f"solve with `{name}` left relative residual {residual:.3e}",
                condition=cond,
            )
    DEFAULT_LOGGER.debug(f"solved system `{name}` with condition number {cond:.3e}")
    return X
