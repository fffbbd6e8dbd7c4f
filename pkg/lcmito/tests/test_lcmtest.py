"""
Test cases for the local covariance measure test: the LCM path, the plug-in variance,
the Brownian supremum distribution, folds and the single-split and cross-fitted tests
"""

# Imports
import numpy as np
import pytest

from lcmito import lcmtest, ouest, sdesim
from lcmito.filtering import QuerySpec


# Constants
QUERY = QuerySpec.leave_one_out(0, 1, 3)


# Util functions
def _small_data(n_traj: int = 60, seed: int = 4) -> sdesim.TrajectorySet:
    phi = np.array([
        [-1.0, 0.0, 0.3],
        [0.0, -1.0, 0.2],
        [0.4, 0.0, -1.0],
    ])
    model = sdesim.OUModel(phi=phi, sigma=1.0)
    grid = sdesim.TimeGrid(delta=0.01, n_steps=50)
    return sdesim.simulate(model, grid, n_traj, rng_seed=seed)


# Tests
def test_lcm_zero_residuals():
    grid = sdesim.TimeGrid(delta=0.1, n_steps=5)
    values = np.random.default_rng(0).normal(size=(3, 6, 3))
    pi_hat = values[:, :, 0]
    mu_hat = np.random.default_rng(1).normal(size=(3, 6))
    gamma = lcmtest.compute_lcm(values, pi_hat, mu_hat, QUERY, grid)
    assert np.array_equal(gamma, np.zeros(6))


def test_lcm_hand_example():
    # Ĝ = (2, 3, ·), X_β increments (0.3, -0.1), μ̂ = 0
    g_hat = np.array([[2.0, 3.0, 0.0]])
    x_beta = np.array([[0.0, 0.3, 0.2]])
    mu_hat = np.zeros((1, 3))
    gamma = lcmtest.lcm_from_residuals(g_hat, x_beta, mu_hat, delta=0.5)
    assert np.allclose(gamma, [0.0, 0.6, 0.6 + 3.0 * (-0.1)], atol=1e-15)


def test_lcm_drift_correction():
    # One step: Ĝ_0 (ΔX_β - δ μ̂_0) = 1.5 (0.4 - 0.1 · 2)
    g_hat = np.array([[1.5, 0.0]])
    x_beta = np.array([[1.0, 1.4]])
    mu_hat = np.array([[2.0, 9.0]])
    gamma = lcmtest.lcm_from_residuals(g_hat, x_beta, mu_hat, delta=0.1)
    assert np.allclose(gamma, [0.0, 0.3], atol=1e-15)


def test_lcm_matches_double_loop_and_telescopes():
    rng = np.random.default_rng(2)
    n_traj, n = 4, 12
    g_hat = rng.normal(size=(n_traj, n + 1))
    x_beta = rng.normal(size=(n_traj, n + 1))
    mu_hat = rng.normal(size=(n_traj, n + 1))
    delta = 0.05
    gamma = lcmtest.lcm_from_residuals(g_hat, x_beta, mu_hat, delta)

    expected = np.zeros(n + 1)
    for k in range(1, n + 1):
        total = 0.0
        for j in range(n_traj):
            for l in range(1, k + 1):
                d_m = (x_beta[j, l] - x_beta[j, l - 1]) - delta * mu_hat[j, l - 1]
                total += g_hat[j, l - 1] * d_m
        expected[k] = total / n_traj
    assert np.allclose(gamma, expected, atol=1e-12)

    increments = np.mean(
        g_hat[:, :-1] * (np.diff(x_beta, axis=1) - delta * mu_hat[:, :-1]), axis=0
    )
    assert np.allclose(np.diff(gamma), increments, atol=1e-14)


def test_lcm_shape_mismatch():
    with pytest.raises(ValueError) as cm:
        lcmtest.lcm_from_residuals(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 3)), 0.1)  # noqa: E501
    expected_msg = "shape mismatch: residuals (2, 3), beta paths (2, 4), drifts (2, 3)"
    assert expected_msg == str(cm.value)


def test_variance_examples():
    grid = sdesim.TimeGrid(delta=0.1, n_steps=10)
    zero = lcmtest.compute_variance([1.0, 0.0], np.zeros((3, 11)), grid)
    assert np.array_equal(zero, np.zeros(11))

    ones = lcmtest.compute_variance([1.0, 0.0], np.ones((3, 11)), grid)
    assert np.allclose(ones, grid.times, atol=1e-14)

    scaled = lcmtest.compute_variance([0.6, 0.8], np.ones((3, 11)), grid)
    assert np.allclose(scaled, grid.times, atol=1e-14)


def test_variance_matches_double_loop():
    rng = np.random.default_rng(3)
    grid = sdesim.TimeGrid(delta=0.02, n_steps=15)
    row = rng.normal(size=3)
    g_hat = rng.normal(size=(5, 16))
    variance = lcmtest.compute_variance(row, g_hat, grid)

    norm2 = sum(r * r for r in row)
    total = 0.0
    for j in range(5):
        for l in range(15):
            total += g_hat[j, l] ** 2 * grid.delta
    assert abs(variance[-1] - norm2 * total / 5) < 1e-12
    assert np.all(np.diff(variance) >= 0)


def test_sup_brownian_cdf_limits():
    assert lcmtest.sup_brownian_cdf(0.0, 1.0) == 0.0
    assert lcmtest.sup_brownian_cdf(-1.0, 1.0) == 0.0
    assert abs(lcmtest.sup_brownian_cdf(1e6, 1.0) - 1.0) < 1e-12
    assert lcmtest.sup_brownian_sf(0.0, 1.0) == 1.0


def test_sup_brownian_cdf_series_agree_at_switch():
    for z in [1.5, 2.0, 2.5]:
        theta = lcmtest._cdf_theta_series(z)
        normal = 1.0 - lcmtest._sf_normal_series(z)
        assert abs(theta - normal) < 1e-12


def test_sup_brownian_cdf_is_monotone():
    xs = np.linspace(0.05, 6.0, 200)
    cdf = np.array([lcmtest.sup_brownian_cdf(x, 1.0) for x in xs])
    sf = np.array([lcmtest.sup_brownian_sf(x, 1.0) for x in xs])
    assert np.all(np.diff(cdf) >= 0)
    assert np.all(np.diff(sf) <= 0)
    assert np.allclose(cdf + sf, 1.0, atol=1e-12)


def test_sup_brownian_quantile():
    q = lcmtest.sup_brownian_quantile(0.95, 1.0)
    assert abs(q - 2.2414) < 0.01
    assert abs(lcmtest.sup_brownian_cdf(q, 1.0) - 0.95) < 1e-9

    q4 = lcmtest.sup_brownian_quantile(0.95, 4.0)
    assert abs(q4 - 2.0 * q) < 1e-8
    assert abs(lcmtest.sup_brownian_cdf(q4, 4.0) - 0.95) < 1e-9


def test_sup_brownian_quantile_bad_level():
    with pytest.raises(ValueError) as cm:
        lcmtest.sup_brownian_quantile(1.0, 1.0)
    assert "`level` must lie in (0, 1), got 1.0" == str(cm.value)

    with pytest.raises(ValueError) as cm:
        lcmtest.sup_brownian_cdf(1.0, 0.0)
    assert "`horizon` must be positive, got 0.0" == str(cm.value)


def test_make_folds():
    folds = lcmtest.make_folds(10, 3, rng_seed=5)
    assert sorted(folds.sizes) == [3, 3, 4]
    seen = np.concatenate([folds.fold(k) for k in range(3)])
    assert sorted(seen.tolist()) == list(range(10))
    for k in range(3):
        assert np.intersect1d(folds.fold(k), folds.complement(k)).size == 0

    again = lcmtest.make_folds(10, 3, rng_seed=5)
    assert np.array_equal(folds.assignments, again.assignments)


def test_make_folds_rejects_one_fold():
    with pytest.raises(ValueError) as cm:
        lcmtest.make_folds(10, 1, rng_seed=0)
    assert "`K` must be at least 2, got 1" == str(cm.value)


def test_half_split():
    train, evaluate = lcmtest.half_split(11, rng_seed=4)
    assert (len(train), len(evaluate)) == (5, 6)
    assert sorted(np.concatenate([train, evaluate]).tolist()) == list(range(11))
    again = lcmtest.half_split(11, rng_seed=4)
    assert np.array_equal(train, again[0])

    with pytest.raises(ValueError) as cm:
        lcmtest.half_split(1, rng_seed=0)
    assert "cannot split 1 trajectories into two halves" == str(cm.value)


def test_degenerate_variance_flag():
    grid = sdesim.TimeGrid(delta=0.01, n_steps=20)
    data = sdesim.TrajectorySet(grid=grid, values=np.ones((8, 21, 3)))
    model = ouest.known_model(-np.eye(3), 0.0)
    result = lcmtest.run_test(
        data,
        QUERY,
        ([], list(range(8))),
        ouest.EstimationConfig(stride=1),
        level=0.05,
        model=model,
    )
    assert result.degenerate_variance
    assert result.p_value == 1.0
    assert result.statistic == 0.0
    assert not result.rejected


def test_run_test_split_checks():
    data = _small_data(20)
    config = ouest.EstimationConfig(stride=10)
    with pytest.raises(ValueError) as cm:
        lcmtest.run_test(data, QUERY, ([0, 1, 2], [2, 3]), config, 0.05)
    assert "train and evaluation splits overlap" == str(cm.value)

    with pytest.raises(ValueError) as cm:
        lcmtest.run_test(data, QUERY, (list(range(20)), []), config, 0.05)
    assert "train and evaluation splits must be nonempty" == str(cm.value)

    with pytest.raises(ValueError) as cm:
        lcmtest.run_test(data, QUERY, ([0], [1]), config, 1.5)
    assert "`level` must lie in (0, 1), got 1.5" == str(cm.value)


def test_run_test_single_split():
    data = _small_data(60)
    config = ouest.EstimationConfig(stride=10)
    result = lcmtest.run_test(
        data, QUERY, (list(range(30)), list(range(30, 60))), config, 0.05
    )
    assert result.method == "single"
    assert result.n_traj == 30
    assert result.gamma_path.shape == (51,)
    assert result.gamma_path[0] == 0.0
    assert 0.0 <= result.p_value <= 1.0
    expected = np.sqrt(30) * np.max(np.abs(result.gamma_path)) / np.sqrt(result.variance_T)  # noqa: E501
    assert abs(result.statistic - expected) < 1e-10
    assert abs(result.p_value - lcmtest.sup_brownian_sf(result.statistic, 0.5)) < 1e-15


def test_run_test_with_known_model():
    data = _small_data(40)
    phi = np.array([
        [-1.0, 0.0, 0.3],
        [0.0, -1.0, 0.2],
        [0.4, 0.0, -1.0],
    ])
    result = lcmtest.run_test(
        data,
        QUERY,
        ([], list(range(40))),
        ouest.EstimationConfig(),
        0.05,
        model=ouest.known_model(phi, 1.0),
    )
    assert result.weight == 0.0
    assert not result.degenerate_variance
    to_dict = result.to_dict()
    assert to_dict["query"] == {"alpha": 0, "beta": 1, "cond_set": [1, 2]}
    assert to_dict["rejected"] == result.rejected


def test_crossfit_aggregation():
    data = _small_data(60)
    config = ouest.EstimationConfig(stride=10)
    result = lcmtest.run_crossfit_test(data, QUERY, 3, config, 0.05, rng_seed=11)
    assert result.method == "crossfit"
    assert result.n_traj == 60
    assert len(result.per_fold) == 3
    assert sum(f["n_eval"] for f in result.per_fold) == 60

    mean_variance = np.mean([f["variance_T"] for f in result.per_fold])
    assert abs(result.variance_T - mean_variance) < 1e-12
    expected = np.sqrt(60 / result.variance_T) * np.max(np.abs(result.gamma_path))
    assert abs(result.statistic - expected) < 1e-10


def test_crossfit_matches_manual_folds():
    data = _small_data(60)
    config = ouest.EstimationConfig(stride=10)
    folds = lcmtest.make_folds(60, 3, rng_seed=11)
    models = lcmtest.crossfit_models(data, folds, config)
    shared = lcmtest.run_crossfit_test(
        data, QUERY, 3, config, 0.05, rng_seed=0, models=models, folds=folds
    )
    fresh = lcmtest.run_crossfit_test(data, QUERY, 3, config, 0.05, rng_seed=11)
    assert np.array_equal(shared.gamma_path, fresh.gamma_path)
    assert shared.p_value == fresh.p_value

    gammas = []
    for k in range(3):
        single = lcmtest.run_test(
            data,
            QUERY,
            (folds.complement(k), folds.fold(k)),
            config,
            0.05,
        )
        gammas.append(single.gamma_path)
    assert np.allclose(shared.gamma_path, np.mean(gammas, axis=0), atol=1e-12)


def test_crossfit_is_deterministic():
    data = _small_data(40)
    config = ouest.EstimationConfig(stride=10)
    a = lcmtest.run_crossfit_test(data, QUERY, 2, config, 0.05, rng_seed=3)
    b = lcmtest.run_crossfit_test(data, QUERY, 2, config, 0.05, rng_seed=3, workers=2)
    assert np.array_equal(a.gamma_path, b.gamma_path)
    assert a.statistic == b.statistic


def test_crossfit_rejects_bad_K():
    data = _small_data(10)
    config = ouest.EstimationConfig(stride=10)
    with pytest.raises(ValueError) as cm:
        lcmtest.run_crossfit_test(data, QUERY, 1, config, 0.05, rng_seed=0)
    assert "`K` must be at least 2, got 1" == str(cm.value)

    with pytest.raises(ValueError) as cm:
        lcmtest.run_crossfit_test(data, QUERY, 6, config, 0.05, rng_seed=0)
    assert "`K` (6) exceeds half the number of trajectories (10)" == str(cm.value)

    with pytest.raises(ValueError) as cm:
        lcmtest.run_crossfit_test(data, QUERY, 2.5, config, 0.05, rng_seed=0)
    assert "`K` is not the correct type...should be a <class 'int'>" == str(cm.value)


def test_granger_baseline():
    data = _small_data(60)
    result = lcmtest.granger_test(data, QUERY, stride=10, level=0.05)
    assert result.method == "granger"
    assert result.statistic >= 0.0
    assert 0.0 <= result.p_value <= 1.0

    with pytest.raises(ValueError) as cm:
        lcmtest.granger_test(data, QUERY, stride=0)
    assert "`stride` must lie in 1..50, got 0" == str(cm.value)
