"""Linear MMSE / LS estimators: scalar facts, moment oracles, sparse parity."""

import numpy as np
import pytest

from rasch_lmmse.linear_probit import (
    GeneralProbitModel,
    linearize,
    lmmse_fit,
    lmmse_fit_sparse,
    lmmse_predicted_mse,
    ls_fit,
    sign_covariance,
    sparse_cy,
)

from oracles import mc_sign_moments


def scalar_model():
    return GeneralProbitModel(
        D=[[1.0]], m=[0.0], x_mean=[0.0], C_x=[[1.0]]
    )


def random_model(rng, M, N, zero_mean=False, scale=1.0):
    D = rng.normal(size=(M, N))
    A = rng.normal(size=(N, N))
    C_x = scale * (A @ A.T + N * np.eye(N))
    if zero_mean:
        return GeneralProbitModel(D=D, m=np.zeros(M), x_mean=np.zeros(N), C_x=C_x)
    return GeneralProbitModel(
        D=D, m=rng.normal(size=M), x_mean=rng.normal(size=N), C_x=C_x
    )


def test_scalar_lmmse_facts():
    model = scalar_model()
    lin = linearize(model)
    assert lin.E[0, 0] == pytest.approx(1.0 / np.sqrt(np.pi), abs=1e-15)
    assert lin.C_y[0, 0] == 1.0
    sol = lmmse_fit(model, [1.0])
    assert sol.estimate[0] == pytest.approx(1.0 / np.sqrt(np.pi), abs=1e-15)
    assert sol.predicted_mse == pytest.approx(1.0 - 1.0 / np.pi, abs=1e-15)
    sol_neg = lmmse_fit(model, [-1.0])
    assert sol_neg.estimate[0] == pytest.approx(-1.0 / np.sqrt(np.pi), abs=1e-15)
    total, per_comp = lmmse_predicted_mse(model)
    assert total == pytest.approx(1.0 - 1.0 / np.pi, abs=1e-15)
    assert per_comp[0] == pytest.approx(1.0 - 1.0 / np.pi, abs=1e-15)


def test_scalar_ls_facts():
    model = scalar_model()
    sol = ls_fit(model, [1.0])
    assert sol.estimate[0] == pytest.approx(np.sqrt(np.pi), abs=5e-15)
    assert sol.predicted_mse == pytest.approx(np.pi - 1.0, abs=5e-15)
    assert sol.method == "ls"


def test_ls_never_beats_lmmse():
    rng = np.random.default_rng(3)
    for _ in range(10):
        model = random_model(rng, M=6, N=3, zero_mean=True)
        y = np.sign(rng.normal(size=6))
        y[y == 0] = 1.0
        ls_sol = ls_fit(model, y)
        lm_sol = lmmse_fit(model, y)
        assert ls_sol.predicted_mse >= lm_sol.predicted_mse - 1e-10


def test_general_moments_match_monte_carlo():
    rng = np.random.default_rng(12)
    model = random_model(rng, M=4, N=3, scale=0.3)
    lin = linearize(model)
    n = 2_000_000
    y_mean, C_y, E, se = mc_sign_moments(
        model.D, model.m, model.x_mean, model.C_x, n, seed=99
    )
    assert np.all(np.abs(lin.y_mean - y_mean) <= 5 * se + 1e-12)
    # covariance entries have SE of order 1/sqrt(n)
    tol = 6.0 / np.sqrt(n)
    assert np.max(np.abs(lin.C_y - C_y)) < tol
    scale = np.sqrt(np.diag(model.C_x))[None, :]
    assert np.max(np.abs(lin.E - E) / scale) < tol


def test_lmmse_estimate_matches_conditional_mean_scalar():
    # for M = 1 the linear estimator equals the posterior mean
    model = scalar_model()
    sol = lmmse_fit(model, [1.0])
    assert sol.estimate[0] == pytest.approx(0.5641895835477564, abs=1e-15)


def test_zero_mean_path_agrees_with_general_path():
    from rasch_lmmse.linear_probit import _linearize_general

    rng = np.random.default_rng(5)
    model = random_model(rng, M=7, N=4, zero_mean=True)
    lin_fast = linearize(model)
    lin_slow = _linearize_general(model)
    np.testing.assert_allclose(lin_fast.C_y, lin_slow.C_y, atol=1e-10)
    np.testing.assert_allclose(lin_fast.E, lin_slow.E, atol=1e-12)
    np.testing.assert_allclose(lin_fast.y_mean, 0.0, atol=1e-16)
    assert np.all(np.diag(lin_fast.C_y) == 1.0)


def test_smoothed_scalar_diagonal():
    model = GeneralProbitModel(
        D=[[1.0]], m=[0.0], x_mean=[0.0], C_x=[[1.0]], smoothing_sigma=1.0
    )
    lin = linearize(model)
    # latent variance 2, smoothing adds 1: arcsine of 2/3
    assert lin.C_y[0, 0] == pytest.approx(
        (2.0 / np.pi) * np.arcsin(2.0 / 3.0), abs=1e-15
    )
    assert lin.E[0, 0] == pytest.approx(np.sqrt(2.0 / np.pi) / np.sqrt(3.0), abs=1e-15)


def test_smoothing_requires_zero_mean():
    with pytest.raises(ValueError):
        GeneralProbitModel(
            D=[[1.0]], m=[0.5], x_mean=[0.0], C_x=[[1.0]], smoothing_sigma=1.0
        )
    with pytest.raises(ValueError):
        GeneralProbitModel(
            D=[[1.0]], m=[0.0], x_mean=[0.0], C_x=[[1.0]], smoothing_sigma=-1.0
        )


def test_weight_materialization_paths_agree():
    rng = np.random.default_rng(8)
    model = random_model(rng, M=6, N=3)
    y = np.sign(rng.normal(size=6))
    y[y == 0] = 1.0
    sol_mat = lmmse_fit(model, y, materialize_weights=True)
    sol_solve = lmmse_fit(model, y, materialize_weights=False)
    np.testing.assert_allclose(sol_mat.estimate, sol_solve.estimate, atol=1e-12)
    assert sol_mat.W is not None and sol_solve.W is None
    # b completes the affine map: estimate = W y + b
    np.testing.assert_allclose(
        sol_mat.W @ y + sol_mat.b, sol_mat.estimate, atol=1e-12
    )


def test_saturated_observation_is_handled():
    model = GeneralProbitModel(
        D=np.eye(2), m=[50.0, 0.0], x_mean=[0.0, 0.0], C_x=np.eye(2)
    )
    lin = linearize(model)
    assert lin.y_mean[0] == pytest.approx(1.0, abs=1e-15)
    assert abs(lin.C_y[0, 1]) == 0.0
    sol = lmmse_fit(model, [1.0, -1.0])
    assert np.all(np.isfinite(sol.estimate))
    # the saturated entry carries no information, the other one does
    assert abs(sol.estimate[1]) > 0.1


def test_sparse_cy_matches_dense_bitwise():
    import scipy.sparse

    rng = np.random.default_rng(4)
    N, M = 5, 9
    D_dense = (rng.random((M, N)) < 0.4).astype(float)
    D_dense[0, 0] = 1.0  # keep at least one entry
    prior = np.diag(rng.uniform(0.5, 2.0, size=N))
    model_dense = GeneralProbitModel(
        D=D_dense, m=np.zeros(M), x_mean=np.zeros(N), C_x=prior
    )
    model_sparse = GeneralProbitModel(
        D=scipy.sparse.csr_matrix(D_dense), m=np.zeros(M),
        x_mean=np.zeros(N), C_x=prior,
    )
    C_y_dense = linearize(model_dense).C_y
    C_y_sparse = sparse_cy(model_sparse).toarray()
    assert np.array_equal(C_y_dense, C_y_sparse)


def test_sparse_fit_matches_dense():
    import scipy.sparse

    rng = np.random.default_rng(21)
    N, M = 6, 14
    D_dense = (rng.random((M, N)) < 0.5).astype(float)
    D_dense[np.arange(M), rng.integers(0, N, M)] = 1.0
    prior = np.diag(rng.uniform(0.5, 2.0, size=N))
    y = np.sign(rng.normal(size=M))
    y[y == 0] = 1.0
    dense = GeneralProbitModel(D=D_dense, m=np.zeros(M), x_mean=np.zeros(N), C_x=prior)
    sparse = GeneralProbitModel(
        D=scipy.sparse.csr_matrix(D_dense), m=np.zeros(M),
        x_mean=np.zeros(N), C_x=prior,
    )
    sol_dense = lmmse_fit(dense, y)
    sol_sparse = lmmse_fit_sparse(sparse, y, compute_mse=True)
    np.testing.assert_allclose(sol_sparse.estimate, sol_dense.estimate, atol=1e-9)
    np.testing.assert_allclose(
        sol_sparse.per_component_mse, sol_dense.per_component_mse, atol=1e-8
    )
    assert sol_sparse.method == "lmmse_sparse"


def test_zero_design_returns_prior():
    model = GeneralProbitModel(
        D=np.zeros((3, 2)), m=np.zeros(3), x_mean=[0.7, -0.2],
        C_x=np.diag([2.0, 3.0]),
    )
    sol = lmmse_fit(model, [1.0, -1.0, 1.0])
    np.testing.assert_allclose(sol.estimate, [0.7, -0.2], atol=1e-12)
    assert sol.predicted_mse == pytest.approx(5.0, abs=1e-10)


def test_input_validation():
    model = scalar_model()
    with pytest.raises(ValueError):
        lmmse_fit(model, [2.0])
    with pytest.raises(ValueError):
        lmmse_fit(model, [1.0, 1.0])
    with pytest.raises(ValueError):
        GeneralProbitModel(D=[[1.0]], m=[0.0], x_mean=[0.0], C_x=[[-1.0]])
    with pytest.raises(ValueError):
        GeneralProbitModel(D=[[1.0]], m=[0.0, 0.0], x_mean=[0.0], C_x=[[1.0]])


def test_ls_requires_zero_mean_and_enough_rows():
    rng = np.random.default_rng(6)
    general = random_model(rng, M=5, N=3)
    with pytest.raises(ValueError):
        ls_fit(general, np.ones(5))
    thin = random_model(rng, M=2, N=3, zero_mean=True)
    with pytest.raises(ValueError):
        ls_fit(thin, np.ones(2))


def test_ls_rank_deficient_raises():
    D = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    model = GeneralProbitModel(
        D=D, m=np.zeros(3), x_mean=np.zeros(2), C_x=np.eye(2)
    )
    with pytest.raises(np.linalg.LinAlgError):
        ls_fit(model, np.ones(3))


def test_sign_covariance_matches_direct_formula():
    from rasch_lmmse.specfun import binorm_cdf, norm_cdf

    rng = np.random.default_rng(9)
    for _ in range(20):
        ci, cj = rng.normal(size=2)
        rho = rng.uniform(-0.95, 0.95)
        yi = norm_cdf(ci) - norm_cdf(-ci)
        yj = norm_cdf(cj) - norm_cdf(-cj)
        expected = (
            2.0 * (binorm_cdf(ci, cj, rho) + binorm_cdf(-ci, -cj, rho))
            - 1.0
            - yi * yj
        )
        assert sign_covariance(ci, cj, rho, yi, yj) == pytest.approx(
            expected, abs=1e-14
        )
        # valid covariance of +-1 variables
        assert abs(sign_covariance(ci, cj, rho, yi, yj)) <= np.sqrt(
            (1 - yi**2) * (1 - yj**2)
        ) + 1e-12
