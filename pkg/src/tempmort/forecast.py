"""Projected rates, life expectancy and temperature-induced life-expectancy loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

T_MAX = 105


@dataclass(frozen=True)
class SummaryBand:
    median: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def project_virtual_rates(params, paths):
    """Virtual central rates for simulated ``(K, kappa_f, kappa_m)`` paths.

    ``paths`` is ``(n_sims, horizon, 3)``; returns ``(n_sims, horizon, 2, n_ages)``.
    """
    paths = np.asarray(paths, dtype=float)
    if paths.shape[-1] != 3:
        raise ValidationError("paths must end with a (K, kappa_f, kappa_m) axis")
    K = paths[..., 0]
    kappa = np.moveaxis(paths[..., 1:], -1, -2)  # (..., 2, horizon)
    logm = params.log_rates(K=K, kappa=kappa)    # (..., 2, ages, horizon)
    return np.exp(np.moveaxis(logm, -1, -3))


def apply_temperature(m_tilde, theta):
    """Rates with temperature effects, ``m_tilde * (1 + theta)``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= -1):
        raise ValidationError("attributable fraction must exceed -1")
    return np.asarray(m_tilde, dtype=float) * (1.0 + theta)


def death_prob(m):
    m = np.asarray(m, dtype=float)
    if np.any(m < 0):
        raise ValidationError("central death rates must be non-negative")
    return -np.expm1(-m)


def life_expectancy(q, t_max=T_MAX, first_age=0):
    """Truncated period life expectancy at every age on the last axis.

    ``e_x = sum_{k=1}^{t_max-x} prod_{j=0}^{k-1} (1 - q_{x+j})``, computed by the
    backward recursion ``e_x = p_x (1 + e_{x+1})`` with ``e_{t_max} = 0``.
    Ages at or above ``t_max`` get 0.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[-1]
    top = t_max - first_age
    if top > n:
        raise ValidationError(f"q covers ages up to {first_age + n - 1}, need {t_max - 1}")
    if np.any((q < 0) | (q > 1)):
        raise ValidationError("probabilities must lie in [0, 1]")
    p = 1.0 - q
    e = np.zeros_like(q)
    acc = np.zeros(q.shape[:-1])
    for i in range(top - 1, -1, -1):
        acc = p[..., i] * (1.0 + acc)
        e[..., i] = acc
    return e


def le_loss(q_tilde, q, t_max=T_MAX, first_age=0):
    """Years of life expectancy lost to temperature, ``e(q_tilde) - e(q)``."""
    return life_expectancy(q_tilde, t_max, first_age) - life_expectancy(q, t_max, first_age)


def summarize(values, axis=0, level=0.95):
    """Median and central ``level`` percentile band along ``axis``."""
    values = np.asarray(values, dtype=float)
    if values.shape[axis] < 2:
        raise ValidationError("need at least two values per cell to summarise")
    a = (1 - level) / 2
    lo, med, hi = np.quantile(values, [a, 0.5, 1 - a], axis=axis, method="linear")
    return SummaryBand(med, lo, hi)


def pair_climate_models(n_sims, n_models):
    """Round-robin model index for each simulation."""
    return np.arange(n_sims) % n_models
