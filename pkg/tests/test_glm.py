import warnings

import numpy as np
import pytest

from builders import newton_poisson, random_glm_problem
from tempmort.errors import ConvergenceError, NumericalError, RankDeficientError
from tempmort.glm import deviance_residuals, fit_poisson_irls, poisson_deviance, predict_linear


def test_intercept_only_is_log_mean():
    fit = fit_poisson_irls(np.ones((3, 1)), np.array([1, 2, 3]))
    assert fit.coefficients[0] == pytest.approx(np.log(2), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_matches_newton_oracle(seed):
    X, y, off = random_glm_problem(np.random.default_rng(seed))
    fit = fit_poisson_irls(X, y, off)
    assert np.abs(fit.coefficients - newton_poisson(X, y, off)).max() < 1e-8


def test_quasi_poisson_covariance_scaled_by_pearson_dispersion():
    X, y, off = random_glm_problem(np.random.default_rng(11))
    fit = fit_poisson_irls(X, y, off)
    mu = fit.fitted
    phi = np.sum((y - mu) ** 2 / mu) / (len(y) - X.shape[1])
    info = X.T @ (X * mu[:, None])
    assert fit.dispersion == pytest.approx(phi, rel=1e-12)
    assert np.allclose(fit.covariance, phi * np.linalg.inv(info), rtol=1e-8, atol=1e-14)


def test_deviance_path_non_increasing_and_residuals_square_to_deviance():
    X, y, off = random_glm_problem(np.random.default_rng(5))
    fit = fit_poisson_irls(X, y, off)
    assert np.all(np.diff(fit.deviance_path) <= 1e-9 * fit.deviance_path[0])
    r = deviance_residuals(fit, y)
    assert np.sum(r ** 2) == pytest.approx(poisson_deviance(y, fit.fitted), rel=1e-12)
    mu, se = predict_linear(fit, X, off)
    assert np.allclose(mu, fit.fitted)
    assert np.all(se > 0)


def test_zero_counts_allowed():
    X = np.column_stack([np.ones(20), np.linspace(-1, 1, 20)])
    y = np.r_[np.zeros(10), np.arange(10)]
    fit = fit_poisson_irls(X, y)
    assert np.abs(fit.coefficients - newton_poisson(X, y)).max() < 1e-8


def test_rank_deficiency_names_dependent_columns():
    x = np.linspace(0, 1, 20)
    X = np.column_stack([np.ones(20), x, 2 * x])
    with pytest.raises(RankDeficientError) as err:
        fit_poisson_irls(X, np.ones(20))
    assert err.value.dependent_columns and set(err.value.dependent_columns) <= {1, 2}


def test_ill_conditioned_design_warns():
    x = np.linspace(0, 1, 40)
    X = np.column_stack([np.ones(40), x, x + 1e-11 * np.sin(40 * x)])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            fit_poisson_irls(X, np.full(40, 3.0))
        except NumericalError:
            pass
    assert any("ill-conditioned" in str(w.message) for w in caught)


def test_too_few_rows_and_bad_counts():
    with pytest.raises(NumericalError):
        fit_poisson_irls(np.ones((2, 2)), np.array([1, 2]))
    with pytest.raises(ValueError):
        fit_poisson_irls(np.ones((3, 1)), np.array([1, -2, 3]))


def test_iteration_cap_raises():
    X, y, off = random_glm_problem(np.random.default_rng(2))
    with pytest.raises(ConvergenceError):
        fit_poisson_irls(X, y, off, max_iter=1, tol=0.0)
