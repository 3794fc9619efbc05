"""Temperature-attributable deaths and fractions, historical and projected."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .basis import lagged_log_rr
from .errors import ValidationError


class DayClass(str, Enum):
    NONE = "none"
    MODERATE_COLD = "moderate_cold"
    EXTREME_COLD = "extreme_cold"
    MODERATE_HOT = "moderate_hot"
    EXTREME_HOT = "extreme_hot"


CLASS_ORDER = (DayClass.EXTREME_COLD, DayClass.MODERATE_COLD, DayClass.NONE,
               DayClass.MODERATE_HOT, DayClass.EXTREME_HOT)


def classify_days(temps, mmt, q025, q975):
    """One class per day from its mean temperature.

    Below ``q025`` is extreme cold, ``[q025, mmt)`` moderate cold, exactly
    ``mmt`` none, ``(mmt, q975]`` moderate hot, above ``q975`` extreme hot.
    """
    if not q025 < mmt < q975:
        raise ValidationError(f"need q025 < mmt < q975, got {q025}, {mmt}, {q975}")
    t = np.asarray(temps, dtype=float)
    out = np.full(t.shape, DayClass.NONE.value, dtype="<U13")
    out[t < q025] = DayClass.EXTREME_COLD.value
    out[(t >= q025) & (t < mmt)] = DayClass.MODERATE_COLD.value
    out[(t > mmt) & (t <= q975)] = DayClass.MODERATE_HOT.value
    out[t > q975] = DayClass.EXTREME_HOT.value
    return out


def class_masks(classes):
    classes = np.asarray([str(getattr(c, "value", c)) for c in np.ravel(classes)]).reshape(
        np.shape(classes))
    masks = {"all": np.ones(classes.shape, dtype=bool)}
    for c in CLASS_ORDER:
        masks[c.value] = classes == c.value
    return masks


def daily_log_rr(theta, fit_or_spec, values, mmt=None):
    """Lagged daily log-RR centred at the MMT (see ``basis.lagged_log_rr``)."""
    spec = getattr(fit_or_spec, "cb_spec", fit_or_spec)
    ref = getattr(fit_or_spec, "mmt", None) if mmt is None else mmt
    if ref is None:
        raise ValueError("reference temperature required")
    return lagged_log_rr(theta, spec, values, ref)


def _year_index(years):
    years = np.asarray(years)
    uniq, inv = np.unique(years, return_inverse=True)
    return uniq, inv


def backward_attributed(g, deaths, years, mask=None):
    """Historical attributed deaths ``(1 - exp(-g)) * deaths``.

    Returns the daily values and ``(years, annual totals over the mask)``.
    ``g`` may carry a trailing draw axis.
    """
    g = np.asarray(g, dtype=float)
    deaths = np.asarray(deaths, dtype=float)
    if g.ndim == 2:
        deaths = deaths[:, None]
    daily = -np.expm1(-g) * deaths
    return daily, annual_sum(daily, years, mask)


def annual_sum(daily, years, mask=None):
    uniq, inv = _year_index(years)
    daily = np.asarray(daily, dtype=float)
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        daily = daily * (m[:, None] if daily.ndim == 2 else m)
    out = np.zeros((len(uniq),) + daily.shape[1:])
    np.add.at(out, inv, daily)
    return uniq, out


def attributable_fraction_hist(attributed, observed):
    """Annual attributable fraction ``attributed / observed``."""
    attributed = np.asarray(attributed, dtype=float)
    observed = np.asarray(observed, dtype=float)
    if observed.ndim < attributed.ndim:
        observed = observed.reshape(observed.shape + (1,) * (attributed.ndim - observed.ndim))
    bad = (observed <= 0) & (attributed != 0)
    if np.any(bad):
        raise ValidationError("zero observed deaths with non-zero attributed deaths")
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(observed > 0, attributed / np.where(observed > 0, observed, 1.0), 0.0)
    return theta


def expand_to_ages(theta_by_bucket, scheme, ages):
    """Share each bucket's fraction with every age inside it.

    ``theta_by_bucket`` has the bucket axis first; output has an age axis first.
    """
    theta_by_bucket = np.asarray(theta_by_bucket)
    return theta_by_bucket[scheme.index_of(np.asarray(ages))]


def exposure_adjustment(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= -1):
        raise ValidationError("attributable fraction must exceed -1")
    return 1.0 + theta


def uniform_weights(dates):
    """Equal weight for each day of a year, normalised to sum to one per year
    (1/365, or 1/366 in leap years)."""
    years = np.asarray(dates, dtype="datetime64[D]").astype("datetime64[Y]")
    _, inv, counts = np.unique(years, return_inverse=True, return_counts=True)
    return 1.0 / counts[inv]


def forward_attributable_fraction(g, weights, mask=None, atol=1e-12):
    """Projected fraction ``sum_{d in D} w_d (exp(g_d) - 1)`` for one year.

    ``weights`` cover the whole year and must sum to one. May be negative.
    """
    g = np.asarray(g, dtype=float)
    w = np.asarray(weights, dtype=float)
    if abs(w.sum() - 1.0) > atol:
        raise ValidationError(f"day weights sum to {w.sum()!r}, expected 1")
    m = np.ones(len(w), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    wm = w * m
    return np.tensordot(wm, np.expm1(g), axes=(0, 0))


def forward_fraction_by_year(g, dates, mask=None, weights=None):
    """Vectorised ``forward_attributable_fraction`` for every year of a series.

    Returns ``(years, theta)`` with theta shaped ``(n_years,) + g.shape[1:]``.
    """
    dates = np.asarray(dates, dtype="datetime64[D]")
    years = dates.astype("datetime64[Y]").astype(int) + 1970
    w = uniform_weights(dates) if weights is None else np.asarray(weights, dtype=float)
    uniq, totals = annual_sum(w, years)
    if np.any(np.abs(totals - 1.0) > 1e-9):
        raise ValidationError("day weights must sum to one within each year")
    contrib = np.expm1(np.asarray(g, dtype=float))
    wm = w if mask is None else w * np.asarray(mask, dtype=bool)
    contrib = contrib * (wm[:, None] if contrib.ndim == 2 else wm)
    return annual_sum(contrib, years)
