"""
Test cases for the dense linear algebra helpers
"""

# Imports
import numpy as np
import pytest

from lcmito import matcore
from lcmito.errors import NumericalError


# Tests
def test_mat_exp_zero_is_identity():
    assert np.allclose(matcore.mat_exp(np.zeros((3, 3)), 2.5), np.eye(3), atol=1e-14)


def test_mat_exp_scalar():
    out = matcore.mat_exp([[-1.0]], 0.1)
    assert abs(out[0, 0] - 0.904837418) < 1e-9


def test_mat_exp_nilpotent():
    out = matcore.mat_exp([[0.0, 1.0], [0.0, 0.0]], 1.0)
    assert np.allclose(out, [[1.0, 1.0], [0.0, 1.0]], atol=1e-14)


def test_mat_exp_semigroup():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4))
    lhs = matcore.mat_exp(A, 0.3) @ matcore.mat_exp(A, 0.5)
    rhs = matcore.mat_exp(A, 0.8)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


def test_mat_exp_not_square():
    with pytest.raises(ValueError) as cm:
        matcore.mat_exp(np.zeros((2, 3)))
    assert "`A` must be square, got shape (2, 3)" == str(cm.value)


def test_svd_clip_identity_unchanged():
    out = matcore.svd_clip(np.eye(3), 1.0, 3.0)
    assert np.allclose(out, np.eye(3), atol=1e-14)


def test_svd_clip_diagonal():
    out = matcore.svd_clip(np.diag([5.0, 0.5]), 1.0, 3.0)
    assert np.allclose(out, np.diag([3.0, 1.0]), atol=1e-12)


def test_svd_clip_random_bounds_and_idempotence():
    rng = np.random.default_rng(1)
    for _ in range(20):
        A = rng.normal(scale=3.0, size=(5, 5))
        out = matcore.svd_clip(A, 0.5, 2.0)
        S = np.linalg.svd(out, compute_uv=False)
        assert S.min() >= 0.5 - 1e-10
        assert S.max() <= 2.0 + 1e-10
        again = matcore.svd_clip(out, 0.5, 2.0)
        assert np.allclose(again, out, atol=1e-10)


def test_svd_clip_does_not_mutate():
    A = np.diag([5.0, 0.5])
    copy = A.copy()
    matcore.svd_clip(A, 1.0, 3.0)
    assert np.array_equal(A, copy)


def test_svd_clip_bad_bounds():
    with pytest.raises(ValueError) as cm:
        matcore.svd_clip(np.eye(2), 3.0, 1.0)
    assert "`lo` (3.0) must not exceed `hi` (1.0)" == str(cm.value)

    with pytest.raises(ValueError) as cm:
        matcore.svd_clip(np.eye(2), 0.0, 1.0)
    assert "`lo` must be positive, got 0.0" == str(cm.value)


def test_kron_examples():
    assert np.array_equal(matcore.kron(np.eye(2), [[2.0]]), 2.0 * np.eye(2))
    out = matcore.kron([[1.0, 2.0]], [[1.0], [3.0]])
    assert np.array_equal(out, [[1.0, 2.0], [3.0, 6.0]])


def test_kron_mixed_product():
    rng = np.random.default_rng(2)
    A, B, C, D = (rng.normal(size=(3, 3)) for _ in range(4))
    lhs = matcore.kron(A, B) @ matcore.kron(C, D)
    rhs = matcore.kron(A @ C, B @ D)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_solve_identity():
    B = np.arange(6.0).reshape(3, 2)
    assert np.allclose(matcore.solve(np.eye(3), B), B)


def test_solve_diagonal():
    out = matcore.solve(np.diag([2.0, 4.0]), np.eye(2))
    assert np.allclose(out, np.diag([0.5, 0.25]), atol=1e-15)


def test_solve_singular():
    with pytest.raises(NumericalError) as cm:
        matcore.solve([[1.0, 1.0], [1.0, 1.0]], np.eye(2), name="C_N(0)")
    assert "`C_N(0)` is singular or ill-conditioned" in str(cm.value)
    assert cm.value.condition is not None


def test_solve_shape_mismatch():
    with pytest.raises(ValueError) as cm:
        matcore.solve(np.eye(2), np.ones(3))
    assert "right-hand side has 3 rows but `A` has 2" == str(cm.value)


def test_non_finite_entries_rejected():
    bad = np.array([[1.0, np.nan], [0.0, 1.0]])
    for fn in [
        lambda: matcore.mat_exp(bad),
        lambda: matcore.svd_clip(bad, 1.0, 3.0),
        lambda: matcore.kron(bad, np.eye(2)),
        lambda: matcore.solve(bad, np.eye(2)),
    ]:
        with pytest.raises(ValueError) as cm:
            fn()
        assert "has non-finite entries" in str(cm.value)
