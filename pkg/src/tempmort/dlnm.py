"""Per-stratum distributed-lag non-linear temperature-mortality model."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .basis import (
    CrossBasisSpec,
    SplineSpec,
    build_cross_basis,
    cumulative_contrast,
    cumulative_curve,
    default_cross_basis_spec,
    natural_cubic_basis,
)
from .data import empirical_quantile
from .errors import FactorizationError
from .glm import GlmFit, fit_poisson_irls

Z95 = 1.959963984540054
QUANTILE_LEVELS = (0.01, 0.025, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.975, 0.99)


@dataclass(frozen=True)
class DlnmConfig:
    max_lag: int = 21
    var_percentiles: tuple = (0.10, 0.75, 0.90)
    lag_knots: int = 3
    time_df_per_year: int = 8
    day_of_week: bool = True
    confounders: tuple = ()
    mmt_percentiles: tuple = (0.01, 0.99)

    def __post_init__(self):
        if int(self.max_lag) < 1:
            raise ValueError("max_lag must be >= 1")
        pct = tuple(float(p) for p in self.var_percentiles)
        if any(not 0 < p < 1 for p in pct) or any(b <= a for a, b in zip(pct, pct[1:])):
            raise ValueError("var_percentiles must be strictly increasing inside (0, 1)")
        object.__setattr__(self, "var_percentiles", pct)
        object.__setattr__(self, "mmt_percentiles", tuple(float(p) for p in self.mmt_percentiles))
        object.__setattr__(self, "confounders", tuple(self.confounders))

    def to_dict(self):
        d = asdict(self)
        d["var_percentiles"] = list(self.var_percentiles)
        d["mmt_percentiles"] = list(self.mmt_percentiles)
        d["confounders"] = list(self.confounders)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


@dataclass(frozen=True)
class DlnmDesign:
    matrix: np.ndarray
    counts: np.ndarray
    offset: np.ndarray
    rows: np.ndarray
    cb_slice: slice
    cb_spec: CrossBasisSpec
    column_names: tuple


def _n_years(dates):
    return len(np.unique(dates.astype("datetime64[Y]")))


def build_design(stratum, temps, config=None, confounders=None):
    """Design for one stratum, dropping the first ``max_lag`` days.

    Columns: intercept, cross-basis, natural spline of time with
    ``time_df_per_year`` df per calendar year, six day-of-week indicators
    (Monday baseline), then confounders. No exposure offset.
    """
    config = config or DlnmConfig()
    if not np.array_equal(stratum.dates, temps.dates):
        raise ValueError("stratum and temperature series are not aligned")
    n = len(temps)
    L = config.max_lag
    if n <= L:
        raise ValueError(f"series of length {n} must exceed max_lag {L}")
    spec = default_cross_basis_spec(temps, L, config.var_percentiles, config.lag_knots)
    cb = build_cross_basis(temps, spec)

    blocks = [np.ones((n, 1)), cb.matrix]
    names = ["intercept"] + [f"cb{j}.{k}" for j in range(spec.var_spec.dim)
                             for k in range(spec.lag_spec.dim)]
    t = np.arange(n, dtype=float)
    df = config.time_df_per_year * _n_years(temps.dates)
    if df > 0:
        time_spec = SplineSpec.from_df(t, df, intercept=False)
        blocks.append(natural_cubic_basis(t, time_spec))
        names += [f"time{i}" for i in range(df)]
    if config.day_of_week:
        # numpy weekday: 1970-01-01 was a Thursday
        dow = (temps.dates.astype(int) + 3) % 7
        blocks.append((dow[:, None] == np.arange(1, 7)[None, :]).astype(float))
        names += [f"dow{i}" for i in range(1, 7)]
    if config.confounders:
        if confounders is None:
            raise ValueError(f"confounder columns {config.confounders} not supplied")
        for name in config.confounders:
            col = np.asarray(confounders[name], dtype=float)
            if col.shape != (n,):
                raise ValueError(f"confounder {name!r} has wrong length")
            blocks.append(col[:, None])
            names.append(name)
    X = np.hstack(blocks)
    rows = np.arange(L, n)
    cb_slice = slice(1, 1 + spec.dim)
    return DlnmDesign(X[rows], np.asarray(stratum.deaths, dtype=float)[rows], np.zeros(len(rows)),
                      rows, cb_slice, spec, tuple(names))


@dataclass(frozen=True)
class DlnmFit:
    stratum: tuple
    config: DlnmConfig
    cb_spec: CrossBasisSpec
    theta: np.ndarray
    theta_cov: np.ndarray
    mmt: float
    quantiles: dict
    dispersion: float
    deviance: float
    n_obs: int
    n_params: int
    coefficients: np.ndarray = field(default=None, compare=False)
    glm: GlmFit = field(default=None, compare=False, repr=False)

    def to_dict(self):
        return {
            "stratum": {"gender": self.stratum[0], "bucket": self.stratum[1]},
            "config": self.config.to_dict(),
            "cross_basis": self.cb_spec.to_dict(),
            "theta": self.theta.tolist(),
            "theta_cov": self.theta_cov.ravel().tolist(),
            "coefficients": None if self.coefficients is None else self.coefficients.tolist(),
            "mmt": self.mmt,
            "quantiles": {repr(k): v for k, v in self.quantiles.items()},
            "dispersion": self.dispersion,
            "deviance": self.deviance,
            "n_obs": self.n_obs,
            "n_params": self.n_params,
        }

    @classmethod
    def from_dict(cls, d):
        spec = CrossBasisSpec.from_dict(d["cross_basis"])
        dim = spec.dim
        coefs = d.get("coefficients")
        return cls(
            (d["stratum"]["gender"], d["stratum"]["bucket"]),
            DlnmConfig.from_dict(d["config"]),
            spec,
            np.array(d["theta"], dtype=float),
            np.array(d["theta_cov"], dtype=float).reshape(dim, dim),
            float(d["mmt"]),
            {float(k): float(v) for k, v in d["quantiles"].items()},
            float(d["dispersion"]),
            float(d["deviance"]),
            int(d["n_obs"]),
            int(d["n_params"]),
            None if coefs is None else np.array(coefs, dtype=float),
        )


def save_fit(fit, path, extra=None):
    doc = fit.to_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_fit(path):
    return DlnmFit.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def mmt_grid(lo, hi, step=0.1):
    """Grid on multiples of ``step`` covering ``[lo, hi]`` from the inside."""
    start = np.ceil(lo / step - 1e-9)
    stop = np.floor(hi / step + 1e-9)
    if stop < start:
        return np.array([round(lo / step) * step])
    return np.round(np.arange(start, stop + 1) * step, 10)


def grid_argmin(values, grid):
    """Argmin over a grid, ties broken toward the lower grid point."""
    values = np.asarray(values)
    return float(grid[int(np.flatnonzero(values == values.min())[0])])


def find_mmt(fit, percentile_range=None, step=0.1, quantiles=None):
    """Minimum mortality temperature on a 0.1 degree grid between calibration
    percentiles (default 1st-99th)."""
    lo_p, hi_p = percentile_range or fit.config.mmt_percentiles
    q = quantiles if quantiles is not None else fit.quantiles
    grid = mmt_grid(q[lo_p], q[hi_p], step)
    curve = cumulative_curve(fit.theta, fit.cb_spec, grid, grid[0])
    return grid_argmin(curve, grid)


def fit_dlnm(stratum, temps, config=None, confounders=None):
    config = config or DlnmConfig()
    design = build_design(stratum, temps, config, confounders)
    glm = fit_poisson_irls(design.matrix, design.counts, design.offset)
    levels = sorted(set(QUANTILE_LEVELS) | set(config.mmt_percentiles))
    quantiles = dict(zip(levels, (float(v) for v in empirical_quantile(temps.mean, levels))))
    sl = design.cb_slice
    fit = DlnmFit(
        stratum.key, config, design.cb_spec,
        glm.coefficients[sl].copy(), glm.covariance[sl, sl].copy(),
        float("nan"), quantiles, glm.dispersion, glm.deviance, glm.n_obs, glm.n_params,
        glm.coefficients.copy(), glm,
    )
    return _with_mmt(fit, find_mmt(fit))


def _with_mmt(fit, mmt):
    return DlnmFit(fit.stratum, fit.config, fit.cb_spec, fit.theta, fit.theta_cov, float(mmt),
                   fit.quantiles, fit.dispersion, fit.deviance, fit.n_obs, fit.n_params,
                   fit.coefficients, fit.glm)


def relative_risk(fit, grid, theta=None):
    """Cumulative relative risk centred at the fit's MMT with 95% bounds."""
    theta = fit.theta if theta is None else np.asarray(theta)
    A = cumulative_contrast(fit.cb_spec, grid, fit.mmt)
    g = A @ theta
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", A, fit.theta_cov, A), 0.0))
    return np.exp(g), np.exp(g - Z95 * se), np.exp(g + Z95 * se)


def bootstrap_coeffs(fit, n_draws, seed):
    """Draws of the cross-basis coefficients from N(theta, Cov).

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    cov = np.asarray(fit.theta_cov, dtype=float)
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2)
    scale = max(float(np.abs(vals).max()), np.finfo(float).tiny)
    if vals.min() < -1e-10 * scale:
        raise FactorizationError(
            f"coefficient covariance is not positive semidefinite (min eigenvalue "
            f"{vals.min():.3g}); add diagonal jitter"
        )
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((int(n_draws), len(fit.theta)))
    return fit.theta + z @ root.T
