"""Heatwave detection from trailing 3-day means of daily minima and maxima."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import empirical_quantile


@dataclass(frozen=True)
class HeatwaveEpisode:
    start: np.datetime64
    end: np.datetime64
    duration: int
    severity: float
    intensity: float


def thresholds(tmin, tmax, p=0.995):
    """Alert thresholds ``(r_min, r_max)``: the ``p`` quantiles of the reference
    daily minima and maxima."""
    tmin = np.asarray(tmin, dtype=float)
    tmax = np.asarray(tmax, dtype=float)
    if tmin.size == 0 or tmax.size == 0:
        raise ValueError("empty reference window")
    return float(empirical_quantile(tmin, p)), float(empirical_quantile(tmax, p))


def reference_thresholds(series, start="1981-01-01", end="2010-12-31", p=0.995):
    ref = series.slice(start, end)
    if len(ref) == 0 or ref.dates[0] != np.datetime64(start) or ref.dates[-1] != np.datetime64(end):
        raise ValueError(f"reference window {start}..{end} not fully covered by the series")
    return thresholds(ref.tmin, ref.tmax, p)


def biometeorological_indicator(tmin, tmax):
    """Mean of the three preceding days (d-1, d-2, d-3); NaN for the first three days."""
    out = []
    for x in (tmin, tmax):
        x = np.asarray(x, dtype=float)
        if x.size < 4:
            raise ValueError("need at least 4 days")
        ind = np.full(x.shape, np.nan)
        ind[3:] = (x[2:-1] + x[1:-2] + x[:-3]) / 3.0
        out.append(ind)
    return out[0], out[1]


def flag_days(tmin, tmax, r_min, r_max):
    ind_min, ind_max = biometeorological_indicator(tmin, tmax)
    with np.errstate(invalid="ignore"):
        return (ind_min > r_min) & (ind_max > r_max)


def _runs(flags):
    flags = np.asarray(flags, dtype=bool)
    edges = np.diff(np.r_[0, flags.astype(int), 0])
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts, ends))


def characterize(tmin, tmax, r_min, r_max, start, end):
    """Duration, cumulative severity and intensity over days ``start..end``
    (inclusive indices) using the raw daily temperatures."""
    lo = np.abs(np.asarray(tmin, dtype=float)[start:end + 1] - r_min)
    hi = np.abs(np.asarray(tmax, dtype=float)[start:end + 1] - r_max)
    return int(end - start + 1), float(np.sum(lo + hi)), float(lo.max() + hi.max())


def detect(series, r_min, r_max):
    """Maximal runs of flagged days, each characterised as one episode."""
    flags = flag_days(series.tmin, series.tmax, r_min, r_max)
    episodes = []
    for s, e in _runs(flags):
        duration, severity, intensity = characterize(series.tmin, series.tmax, r_min, r_max, s, e)
        episodes.append(HeatwaveEpisode(series.dates[s], series.dates[e], duration, severity,
                                        intensity))
    return episodes
