"""Natural cubic spline bases and the exposure-lag cross-basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .data import DailyTemperatureSeries, empirical_quantile


@dataclass(frozen=True)
class SplineSpec:
    internal_knots: tuple
    boundary_knots: tuple
    intercept: bool = False

    def __post_init__(self):
        knots = tuple(float(k) for k in self.internal_knots)
        lo, hi = (float(b) for b in self.boundary_knots)
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError(f"internal knots must be strictly increasing: {knots}")
        if not lo < hi:
            raise ValueError("boundary knots must satisfy lo < hi")
        if knots and not (lo < knots[0] and knots[-1] < hi):
            raise ValueError("boundary knots must strictly bracket the internal knots")
        object.__setattr__(self, "internal_knots", knots)
        object.__setattr__(self, "boundary_knots", (lo, hi))

    @property
    def dim(self):
        return len(self.internal_knots) + 1 + int(self.intercept)

    @classmethod
    def from_percentiles(cls, x, percentiles, intercept=False):
        x = np.asarray(x, dtype=float)
        knots = empirical_quantile(x, np.asarray(percentiles))
        return cls(tuple(np.atleast_1d(knots)), (float(x.min()), float(x.max())), intercept)

    @classmethod
    def from_df(cls, x, df, intercept=False):
        """Knots at equally spaced quantiles of ``x`` giving ``df`` columns."""
        n_internal = df - 1 - int(intercept)
        if n_internal < 0:
            raise ValueError("df too small for a natural cubic spline")
        probs = np.linspace(0, 1, n_internal + 2)[1:-1]
        return cls.from_percentiles(x, probs, intercept)


def _bspline_parts(spec):
    lo, hi = spec.boundary_knots
    t = np.r_[[lo] * 4, spec.internal_knots, [hi] * 4]
    nb = len(t) - 4
    spl = BSpline(t, np.eye(nb), 3, extrapolate=True)
    d1 = spl.derivative(1)
    d2 = spl.derivative(2)
    const = np.vstack([d2(lo), d2(hi)])
    first = 0 if spec.intercept else 1
    const = const[:, first:]
    # null space of the second-derivative constraints at both boundaries
    q, _ = np.linalg.qr(const.T, mode="complete")
    return spl, d1, first, q[:, 2:]


def natural_cubic_basis(x, spec):
    """Evaluate a natural cubic spline basis at ``x``.

    Built from the cubic B-spline basis on the given knots, projected onto
    the subspace with zero second derivative at both boundary knots. Beyond
    the boundary knots each column continues linearly.

    Returns an ``(n, spec.dim)`` array.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("natural_cubic_basis requires finite x")
    spl, d1, first, null = _bspline_parts(spec)
    lo, hi = spec.boundary_knots
    inside = np.clip(x, lo, hi)
    raw = spl(inside)
    below, above = x < lo, x > hi
    if below.any():
        raw[below] = spl(lo) + np.outer(x[below] - lo, d1(lo))
    if above.any():
        raw[above] = spl(hi) + np.outer(x[above] - hi, d1(hi))
    out = raw[:, first:] @ null
    return out.reshape(shape + (spec.dim,))


def log_spaced_lag_knots(max_lag, n_knots):
    """Knots equally spaced on the log scale strictly inside (1, max_lag)."""
    if max_lag < 2:
        raise ValueError("max_lag must be at least 2")
    if n_knots < 1:
        raise ValueError("need at least one lag knot")
    j = np.arange(1, n_knots + 1)
    return np.exp(j * np.log(max_lag) / (n_knots + 1))


@dataclass(frozen=True)
class CrossBasisSpec:
    var_spec: SplineSpec
    lag_spec: SplineSpec
    max_lag: int

    def __post_init__(self):
        if int(self.max_lag) < 1:
            raise ValueError("max_lag must be >= 1")
        object.__setattr__(self, "max_lag", int(self.max_lag))

    @property
    def dim(self):
        return self.var_spec.dim * self.lag_spec.dim

    @property
    def lags(self):
        return np.arange(self.max_lag + 1)

    def lag_basis(self):
        return natural_cubic_basis(self.lags, self.lag_spec)

    def to_dict(self):
        return {
            "max_lag": self.max_lag,
            "var_internal_knots": list(self.var_spec.internal_knots),
            "var_boundary_knots": list(self.var_spec.boundary_knots),
            "var_intercept": self.var_spec.intercept,
            "lag_internal_knots": list(self.lag_spec.internal_knots),
            "lag_boundary_knots": list(self.lag_spec.boundary_knots),
            "lag_intercept": self.lag_spec.intercept,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            SplineSpec(tuple(d["var_internal_knots"]), tuple(d["var_boundary_knots"]),
                       d["var_intercept"]),
            SplineSpec(tuple(d["lag_internal_knots"]), tuple(d["lag_boundary_knots"]),
                       d["lag_intercept"]),
            d["max_lag"],
        )


def default_cross_basis_spec(temps, max_lag=21, var_percentiles=(0.10, 0.75, 0.90),
                             n_lag_knots=3):
    """Var basis: knots at temperature percentiles, no intercept, boundaries at the
    observed range. Lag basis: log-spaced knots over 0..max_lag with intercept."""
    values = temps.mean if isinstance(temps, DailyTemperatureSeries) else np.asarray(temps)
    var_spec = SplineSpec.from_percentiles(values, var_percentiles, intercept=False)
    if max_lag >= 2 and n_lag_knots > 0:
        lag_knots = tuple(log_spaced_lag_knots(max_lag, n_lag_knots))
    else:
        lag_knots = ()
    lag_spec = SplineSpec(lag_knots, (0.0, float(max_lag)), intercept=True)
    return CrossBasisSpec(var_spec, lag_spec, max_lag)


@dataclass(frozen=True)
class CrossBasis:
    matrix: np.ndarray
    valid_from: int
    spec: CrossBasisSpec

    @property
    def valid(self):
        return self.matrix[self.valid_from:]


def build_cross_basis(temps, spec):
    """Tensor-product cross-basis.

    Column ``j * lag_dim + k`` at day ``d`` is
    ``sum_{l=0..L} R_j(temp[d-l]) * C_k(l)``. The first ``L`` rows have an
    incomplete lag window and are filled with NaN.
    """
    values = temps.mean if isinstance(temps, DailyTemperatureSeries) else np.asarray(temps, float)
    L = spec.max_lag
    n = len(values)
    if n < L + 1:
        raise ValueError(f"series of length {n} is shorter than max_lag + 1 = {L + 1}")
    R = natural_cubic_basis(values, spec.var_spec)
    C = spec.lag_basis()
    # windows[i, j, l] = R[i + L - l, j]
    windows = np.lib.stride_tricks.sliding_window_view(R, L + 1, axis=0)[:, :, ::-1]
    block = np.einsum("njl,lk->njk", windows, C).reshape(n - L, spec.dim)
    matrix = np.full((n, spec.dim), np.nan)
    matrix[L:] = block
    return CrossBasis(matrix, L, spec)


def cumulative_contrast(spec, grid, reference):
    """Rows ``a(t)`` such that the cumulative log-RR at ``t`` is ``a(t) @ theta``."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    R = natural_cubic_basis(grid, spec.var_spec)
    R0 = natural_cubic_basis(np.array([reference], dtype=float), spec.var_spec)[0]
    csum = spec.lag_basis().sum(axis=0)
    diff = R - R0
    return (diff[:, :, None] * csum[None, None, :]).reshape(len(grid), spec.dim)


def cumulative_curve(theta, spec, grid, reference):
    """Overall cumulative log-RR over the lag window, centred at ``reference``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[0] != spec.dim:
        raise ValueError(f"expected {spec.dim} coefficients, got {theta.shape[0]}")
    return cumulative_contrast(spec, grid, reference) @ theta


def lagged_log_rr(theta, spec, values, reference):
    """Daily log-RR of each day's lagged exposure history, relative to a constant
    exposure at ``reference``.

    The first ``L`` days lack history; the series is padded in front with its
    own first ``L`` days. Returns ``(g, warmup)`` where ``warmup`` flags the
    padded days. ``theta`` may be ``(dim,)`` or ``(dim, n_draws)``.
    """
    values = np.asarray(values, dtype=float)
    L = spec.max_lag
    padded = np.r_[values[:L], values]
    cb = build_cross_basis(padded, spec).matrix[L:]
    R0 = natural_cubic_basis(np.array([reference], dtype=float), spec.var_spec)[0]
    ref_row = np.kron(R0, spec.lag_basis().sum(axis=0))
    g = (cb - ref_row) @ np.asarray(theta, dtype=float)
    warmup = np.zeros(len(values), dtype=bool)
    warmup[:L] = True
    return g, warmup
