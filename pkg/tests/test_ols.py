import numpy as np
import pytest

from midlab import CollinearityError, CompletedFit, InsufficientDataError, ValidationError, fit_ols


def test_exact_fit_recovers_coefficients():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((30, 2))
    y = 1.0 + x[:, 0] + x[:, 1]
    fit = fit_ols(np.column_stack([x, y]), 2, [0, 1], ("x1", "x2"))
    assert fit.param_names == ("intercept", "x1", "x2", "sigma2")
    assert fit.theta_hat[:3] == pytest.approx([1.0, 1.0, 1.0], abs=1e-10)
    assert fit.theta_hat[3] == pytest.approx(0.0, abs=1e-12)
    assert fit.nu_com == 27


def test_hand_worked_simple_regression():
    # x = (-1, 0, 1), y = (0, 1, 3): normal equations give intercept 4/3,
    # slope 3/2, and SSR = 1/6 on one residual df.
    completed = np.array([[-1.0, 0.0], [0.0, 1.0], [1.0, 3.0]])
    fit = fit_ols(completed, 1, [0], ("x",))
    assert fit.theta_hat[0] == pytest.approx(4.0 / 3.0, rel=1e-12)
    assert fit.theta_hat[1] == pytest.approx(3.0 / 2.0, rel=1e-12)
    assert fit.theta_hat[2] == pytest.approx(1.0 / 6.0, rel=1e-10)
    assert fit.nu_com == 1


def test_sigma2_squared_se_is_normal_theory_value():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 2))
    y = 1 + x @ [1.0, 1.0] + rng.standard_normal(40)
    fit = fit_ols(np.column_stack([x, y]), 2, [0, 1])
    sigma2 = fit.theta_hat[-1]
    assert fit.w_hat[-1] == pytest.approx(2 * sigma2**2 / fit.nu_com, rel=1e-12)


def test_too_few_rows():
    completed = np.array([[0.0, 1.0], [1.0, 2.0]])
    with pytest.raises(InsufficientDataError):
        fit_ols(completed, 1, [0])


def test_collinear_design():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(20)
    completed = np.column_stack([x, 2 * x, rng.standard_normal(20)])
    with pytest.raises(CollinearityError):
        fit_ols(completed, 2, [0, 1])


def test_residuals_orthogonal_to_design():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((60, 2))
    y = 1 + x @ [0.5, -2.0] + rng.standard_normal(60)
    fit = fit_ols(np.column_stack([x, y]), 2, [0, 1])
    design = np.column_stack([np.ones(60), x])
    resid = y - design @ fit.theta_hat[:3]
    scale = np.linalg.norm(y) * np.linalg.norm(design, axis=0)
    assert np.all(np.abs(design.T @ resid) < 1e-8 * scale)


def test_row_permutation_leaves_outputs_unchanged():
    # Integer-valued data keeps every accumulation exact, so the estimates are
    # bit-identical under row permutation.
    rng = np.random.default_rng(4)
    completed = rng.integers(-9, 10, size=(25, 3)).astype(float)
    fit = fit_ols(completed, 2, [0, 1])
    perm = rng.permutation(25)
    fit_p = fit_ols(completed[perm], 2, [0, 1])
    assert np.array_equal(fit.theta_hat, fit_p.theta_hat)
    assert np.array_equal(fit.w_hat, fit_p.w_hat)


def test_squared_ses_match_explicit_inverse_oracle():
    rng = np.random.default_rng(5)
    for trial in range(10):
        n = int(rng.integers(8, 21))
        x = rng.standard_normal((n, 2))
        y = rng.standard_normal(n)
        fit = fit_ols(np.column_stack([x, y]), 2, [0, 1])
        design = np.column_stack([np.ones(n), x])
        beta = np.linalg.solve(design.T @ design, design.T @ y)
        resid = y - design @ beta
        sigma2 = resid @ resid / (n - 3)
        oracle = sigma2 * np.diag(np.linalg.inv(design.T @ design))
        assert np.allclose(fit.w_hat[:3], oracle, rtol=1e-8)
        assert np.allclose(fit.theta_hat[:3], beta, rtol=1e-8)


def test_default_predictor_names():
    rng = np.random.default_rng(6)
    completed = rng.standard_normal((10, 3))
    fit = fit_ols(completed, 2, [0, 1])
    assert fit.param_names == ("intercept", "x0", "x1", "sigma2")


def test_completed_fit_validation():
    with pytest.raises(ValidationError):
        CompletedFit(("a",), np.array([1.0]), np.array([-0.5]), 4)
    with pytest.raises(ValidationError):
        CompletedFit(("a", "b"), np.array([1.0]), np.array([0.5]), 4)
    with pytest.raises(ValidationError):
        CompletedFit(("a",), np.array([1.0]), np.array([0.5]), 0)
