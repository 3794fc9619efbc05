"""Joint dynamics of the common and gender period indices.

``Y_t = D + Phi Y_{t-1} + E_t`` with ``Y = (K, kappa_f, kappa_m)``,
``Phi = diag(1, phi_f, phi_m)`` and ``E_t ~ N(0, Sigma)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import rng as rngmod
from .errors import FactorizationError, NumericalError, ValidationError

EPS = 1e-6


@dataclass(frozen=True)
class TsParams:
    delta: float
    c: np.ndarray      # (c_f, c_m)
    phi: np.ndarray    # (phi_f, phi_m)
    sigma: np.ndarray  # 3x3
    loglik: float = float("nan")
    n_obs: int = 0

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.shape != (3, 3) or not np.allclose(sigma, sigma.T, atol=1e-12):
            raise ValidationError("sigma must be a symmetric 3x3 matrix")
        phi = np.asarray(self.phi, dtype=float)
        if np.any(np.abs(phi) >= 1):
            raise ValidationError("AR coefficients must satisfy |phi| < 1")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))

    @property
    def drift_vector(self):
        return np.r_[self.delta, self.c]

    @property
    def Phi(self):
        return np.diag(np.r_[1.0, self.phi])

    @property
    def correlation(self):
        sd = np.sqrt(np.diag(self.sigma))
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.sigma / np.outer(sd, sd)

    def to_dict(self):
        return {
            "delta": self.delta,
            "c": {"female": float(self.c[0]), "male": float(self.c[1])},
            "phi": {"female": float(self.phi[0]), "male": float(self.phi[1])},
            "sigma": self.sigma.tolist(),
            "residual_correlation": np.nan_to_num(self.correlation).tolist(),
            "loglik": self.loglik,
            "n_obs": self.n_obs,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["delta"], [d["c"]["female"], d["c"]["male"]],
                   [d["phi"]["female"], d["phi"]["male"]], np.array(d["sigma"]),
                   d.get("loglik", float("nan")), d.get("n_obs", 0))


def _residuals(params, Y):
    delta, cf, cm, pf, pm = params
    prev, cur = Y[:-1], Y[1:]
    return np.column_stack([
        cur[:, 0] - delta - prev[:, 0],
        cur[:, 1] - cf - pf * prev[:, 1],
        cur[:, 2] - cm - pm * prev[:, 2],
    ])


def _neg_concentrated_loglik(resid, components=slice(None)):
    r = resid[:, components]
    S = r.T @ r / len(r)
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        return 1e300
    return 0.5 * len(r) * logdet


def _intercepts(phi, Y):
    """Drift and intercepts maximising the likelihood for fixed ``phi``.

    Every equation has its own constant as the only other regressor, so the
    optimum is the residual mean whatever ``Sigma`` is.
    """
    prev, cur = Y[:-1], Y[1:]
    return np.r_[np.mean(cur[:, 0] - prev[:, 0]),
                 np.mean(cur[:, 1:] - np.asarray(phi) * prev[:, 1:], axis=0)]


def fit_var(K, kappa_f, kappa_m, eps=EPS):
    """Conditional Gaussian maximum likelihood given the first observation.

    ``Sigma`` is profiled out as the residual covariance and the drift and
    intercepts as residual means, leaving ``n/2 log det Sigma(phi)`` to be
    minimised over the AR coefficients, box-constrained to
    ``[-1 + eps, 1 - eps]`` and started from equation-by-equation least squares.
    """
    Y = np.column_stack([np.asarray(K, float), np.asarray(kappa_f, float),
                         np.asarray(kappa_m, float)])
    if len(Y) < 4:
        raise ValidationError("need at least 4 observations to fit the time-series model")
    if not np.all(np.isfinite(Y)):
        raise ValidationError("non-finite period indices")
    prev, cur = Y[:-1], Y[1:]
    lo, hi = -1 + eps, 1 - eps
    phi0 = np.zeros(2)
    regress = np.zeros(2, dtype=bool)
    for i, j in enumerate((1, 2)):
        x = prev[:, j] - prev[:, j].mean()
        z = cur[:, j] - cur[:, j].mean()
        sxx = float(x @ x)
        regress[i] = sxx > 0
        phi0[i] = float(np.clip((x @ z) / sxx, lo, hi)) if regress[i] else 0.0

    scale = np.std(np.diff(Y, axis=0), axis=0)
    scale[scale == 0] = 1.0
    r0 = _residuals(np.r_[_intercepts(phi0, Y), phi0], Y)
    # components whose least-squares residuals vanish are fitted exactly already
    live = np.flatnonzero(r0.std(axis=0) > 1e-12 * scale)
    free = [i for i in (0, 1) if regress[i] and (i + 1) in live]
    phi = phi0.copy()
    if free:
        def objective(sub):
            full = phi0.copy()
            full[free] = sub
            r = _residuals(np.r_[_intercepts(full, Y), full], Y) / scale
            return _neg_concentrated_loglik(r, live)

        res = optimize.minimize(objective, phi0[free], method="L-BFGS-B",
                                bounds=[(lo, hi)] * len(free),
                                options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
        if not np.all(np.isfinite(res.x)):
            raise NumericalError(f"time-series optimiser failed: {res.message}")
        phi[free] = np.clip(res.x, lo, hi)
    best = np.r_[_intercepts(phi, Y), phi]
    r = _residuals(best, Y)
    sigma = r.T @ r / len(r)
    sigma = (sigma + sigma.T) / 2
    n = len(r)
    sign, logdet = np.linalg.slogdet(sigma)
    loglik = -0.5 * n * (3 * np.log(2 * np.pi) + (logdet if sign > 0 else -np.inf) + 3)
    return TsParams(float(best[0]), best[1:3], phi, sigma, float(loglik), n)


def innovation_factor(sigma, jitter=1e-10):
    """Lower-triangular factor of ``sigma``; zero-variance components stay
    deterministic. Retries once with diagonal jitter before failing."""
    sigma = np.asarray(sigma, dtype=float)
    L = np.zeros_like(sigma)
    idx = np.flatnonzero(np.diag(sigma) > 0)
    if idx.size == 0:
        return L
    sub = sigma[np.ix_(idx, idx)]
    try:
        L[np.ix_(idx, idx)] = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        bump = jitter * np.mean(np.diag(sub))
        try:
            L[np.ix_(idx, idx)] = np.linalg.cholesky(sub + bump * np.eye(len(idx)))
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(f"innovation covariance not factorisable: {exc}") from exc
    return L


def simulate_paths(params, last_y, horizon, n_sims, seed, first_sim=0):
    """Simulate ``n_sims`` trajectories of length ``horizon`` from ``last_y``.

    Simulation ``i`` draws its innovations from the stream
    ``rng.stream(seed, rng.TREND, i)``, so any subset of simulations can be
    regenerated independently. Returns ``(n_sims, horizon, 3)``.
    """
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    L = innovation_factor(params.sigma)
    d = params.drift_vector
    phi = np.r_[1.0, params.phi]
    out = np.empty((n_sims, horizon, 3))
    y0 = np.asarray(last_y, dtype=float)
    for s in range(n_sims):
        z = rngmod.stream(seed, rngmod.TREND, first_sim + s).standard_normal((horizon, 3))
        e = z @ L.T
        y = y0
        for h in range(horizon):
            y = d + phi * y + e[h]
            out[s, h] = y
    return out
