"""Poisson log-link regression by iteratively reweighted least squares.

Quasi-Poisson inference uses the Poisson point estimates with the
covariance scaled by the Pearson dispersion.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, NumericalError, RankDeficientError

COND_WARN = 1e10


@dataclass(frozen=True)
class GlmFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    dispersion: float
    deviance: float
    fitted: np.ndarray
    n_obs: int
    n_params: int
    iterations: int = 0
    deviance_path: tuple = ()

    @property
    def unscaled_covariance(self):
        return self.covariance / self.dispersion if self.dispersion > 0 else self.covariance


def poisson_deviance(y, mu):
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    pos = y > 0
    term = mu - y
    term[pos] += y[pos] * np.log(y[pos] / mu[pos])
    return 2.0 * term.sum()


def _check_rank(X):
    _, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        return
    tol = diag[0] * max(X.shape) * np.finfo(float).eps
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        raise RankDeficientError(sorted(int(c) for c in piv[rank:]))
    cond = diag[0] / diag[-1]
    if cond > COND_WARN:
        warnings.warn(f"design is ill-conditioned (condition estimate {cond:.3g})",
                      RuntimeWarning, stacklevel=3)


def _wls(X, z, w):
    sw = np.sqrt(w)
    q, r = np.linalg.qr(X * sw[:, None])
    beta = linalg.solve_triangular(r, q.T @ (z * sw))
    return beta, r


def fit_poisson_irls(design, counts, offset=None, max_iter=50, tol=1e-10):
    """Fit ``log E[y] = offset + X beta`` for Poisson counts.

    Parameters
    ----------
    design : (n, p) array
        Full-rank design matrix.
    counts : (n,) array of non-negative counts
    offset : (n,) array, optional
    max_iter : int
        Iteration cap; exceeding it raises ``ConvergenceError``.
    tol : float
        Convergence when the relative change in deviance drops below ``tol``.

    Returns
    -------
    GlmFit
        Covariance is ``dispersion * inv(X' W X)`` with the Pearson dispersion
        ``chi2 / (n - p)``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(counts, dtype=float)
    n, p = X.shape
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    if y.shape != (n,) or off.shape != (n,):
        raise ValueError("counts and offset must match the design rows")
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("counts must be finite and non-negative")
    if not np.all(np.isfinite(off)) or not np.all(np.isfinite(X)):
        raise ValueError("design and offset must be finite")
    if n <= p:
        raise NumericalError(f"need more observations ({n}) than parameters ({p})")
    _check_rank(X)

    beta = np.zeros(p)
    ones = np.flatnonzero(np.all(X == 1.0, axis=0))
    if ones.size:
        beta[ones[0]] = np.log(max(y.mean(), 1e-10)) - off.mean()
    eta = off + X @ beta
    mu = np.exp(eta)
    dev = poisson_deviance(y, mu)
    path = [dev]

    for it in range(1, max_iter + 1):
        z = eta - off + (y - mu) / mu
        proposal, _ = _wls(X, z, mu)
        step = proposal - beta
        for _ in range(40):
            new_beta = beta + step
            new_eta = off + X @ new_beta
            new_mu = np.exp(new_eta)
            new_dev = poisson_deviance(y, new_mu) if np.all(np.isfinite(new_mu)) else np.inf
            if new_dev <= dev * (1 + 1e-8) + 1e-12:
                break
            step = step / 2
        else:
            raise ConvergenceError("deviance increased and step halving failed", dev)
        converged = abs(dev - new_dev) / (abs(new_dev) + 0.1) < tol
        beta, eta, mu, dev = new_beta, new_eta, new_mu, new_dev
        path.append(dev)
        if converged:
            break
    else:
        raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations", dev)

    _, r = _wls(X, np.zeros(n), mu)
    rinv = linalg.solve_triangular(r, np.eye(p))
    unscaled = rinv @ rinv.T
    unscaled = (unscaled + unscaled.T) / 2
    chi2 = float(np.sum((y - mu) ** 2 / mu))
    dispersion = chi2 / (n - p)
    return GlmFit(beta, dispersion * unscaled, dispersion, dev, mu, n, p, it, tuple(path))


def deviance_residuals(fit, counts):
    y = np.asarray(counts, dtype=float)
    mu = fit.fitted if isinstance(fit, GlmFit) else np.asarray(fit, dtype=float)
    unit = 2.0 * (mu - y)
    pos = y > 0
    unit[pos] += 2.0 * y[pos] * np.log(y[pos] / mu[pos])
    return np.sign(y - mu) * np.sqrt(np.maximum(unit, 0.0))


def predict_linear(fit, new_design, new_offset=None):
    """Predicted means and standard errors of the linear predictor."""
    X = np.atleast_2d(np.asarray(new_design, dtype=float))
    if X.shape[1] != fit.n_params:
        raise ValueError(f"design has {X.shape[1]} columns, fit has {fit.n_params}")
    off = np.zeros(X.shape[0]) if new_offset is None else np.asarray(new_offset, dtype=float)
    eta = off + X @ fit.coefficients
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", X, fit.covariance, X), 0.0))
    return np.exp(eta), se
