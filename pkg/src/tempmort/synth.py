"""Synthetic dataset with known generating parameters.

Produces files in the same schemas as the real inputs so the whole pipeline
can run (and be checked for recovery) without restricted data:

* station temperatures (seasonal cycle + AR(1) anomalies + warming trend),
* annual deaths from known Li-Lee and time-series parameters, inflated by a
  known temperature effect,
* daily deaths per (gender, bucket) allocated from the annual bucket totals
  in proportion to a known U-shaped lagged temperature response,
* climate-scenario temperature files per model and RCP.

Daily rows are written at one representative age per bucket (the bucket's
lower bound); the pipeline only ever uses bucket totals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import GENDERS
from . import rng as rngmod
from .attribution import daily_log_rr
from .basis import cumulative_curve, default_cross_basis_spec, natural_cubic_basis
from .data import AgeBucketScheme, DailyTemperatureSeries, aggregate_stations, write_scenario_temperatures
from .dlnm import DlnmConfig, grid_argmin, mmt_grid
from .data import empirical_quantile
from .timeseries import TsParams

TRUE_MMT = 19.0
CLIMATE_MODELS = (("CNRM-CM5", "ALADIN63"), ("IPSL-CM5A", "WRF381P"))
RCP_WARMING = {"rcp26": 0.008, "rcp45": 0.022, "rcp85": 0.045}  # degrees per year after 2006


@dataclass(frozen=True)
class SynthSpec:
    start_year: int = 1980
    end_year: int = 2019
    scenario_start: int = 2006
    horizon_end: int = 2100
    n_stations: int = 3
    n_models: int = 2
    max_age: int = 105
    seed: int = 2024


def _days(y0, y1):
    return np.arange(np.datetime64(f"{y0}-01-01"), np.datetime64(f"{y1 + 1}-01-01"))


def _doy(dates):
    return (dates - dates.astype("datetime64[Y]")).astype(int)


def temperature_path(dates, rng, warming=0.0, warm_from=None, base=12.5, amp=8.0):
    """Daily (tmin, tmean, tmax) with a seasonal cycle and AR(1) anomalies."""
    n = len(dates)
    doy = _doy(dates)
    seasonal = base + amp * np.sin(2 * np.pi * (doy - 110) / 365.25)
    eps = rng.standard_normal(n) * 2.6
    anom = np.empty(n)
    anom[0] = eps[0]
    for i in range(1, n):
        anom[i] = 0.75 * anom[i - 1] + eps[i]
    years = dates.astype("datetime64[Y]").astype(int) + 1970
    trend = 0.0 if warm_from is None else warming * np.clip(years - warm_from, 0, None)
    mean = seasonal + anom + trend
    spread_lo = 4.0 + 0.8 * rng.standard_normal(n) ** 2
    spread_hi = 5.0 + 1.0 * rng.standard_normal(n) ** 2 + 1.5 * np.clip(anom, 0, None) / 3
    return mean - spread_lo, mean, mean + spread_hi


def true_response(spec, bucket_index, temps_range):
    """Cross-basis coefficients whose cumulative curve approximates an asymmetric
    parabola with vertex at ``TRUE_MMT`` and an exponentially decaying lag profile."""
    mult = (0.6, 0.9, 1.1, 1.4)[min(bucket_index, 3)]
    grid = np.linspace(temps_range[0], temps_range[1], 400)
    target = np.where(grid < TRUE_MMT, 0.0009, 0.005) * (grid - TRUE_MMT) ** 2 * mult
    R = natural_cubic_basis(grid, spec.var_spec)
    R0 = natural_cubic_basis(np.array([TRUE_MMT]), spec.var_spec)[0]
    a = np.linalg.lstsq(R - R0, target, rcond=None)[0]
    lags = spec.lags
    w = np.exp(-lags / 4.0)
    w /= w.sum()
    C = spec.lag_basis()
    b = np.linalg.lstsq(C, w, rcond=None)[0]
    return np.kron(a, b)


def _lilee_truth(ages, n_years, rng):
    x = ages.astype(float)
    A = np.where(x < 10, -5.2 - 0.38 * x, -9.0 + 0.0815 * (x - 10))
    B = 0.5 + np.exp(-((x - 60) / 35) ** 2)
    B /= np.linalg.norm(B)
    alpha = np.vstack([-0.25 - 0.1 * np.exp(-((x - 30) / 20) ** 2), 0.25 + 0.1 * np.exp(-((x - 25) / 15) ** 2)])
    beta = np.vstack([0.6 + np.exp(-((x - 70) / 25) ** 2), 0.6 + np.exp(-((x - 50) / 30) ** 2)])
    beta /= np.linalg.norm(beta, axis=1, keepdims=True)
    ts = TsParams(-0.9, [0.02, -0.03], [0.6, 0.7],
                  np.array([[0.8, 0.05, -0.03], [0.05, 0.09, 0.02], [-0.03, 0.02, 0.12]]))
    L = np.linalg.cholesky(ts.sigma)
    Y = np.zeros((n_years, 3))
    Y[0] = [18.0, 0.05, -0.1]
    for t in range(1, n_years):
        Y[t] = ts.drift_vector + np.r_[1.0, ts.phi] * Y[t - 1] + L @ rng.standard_normal(3)
    return A, B, alpha, beta, Y, ts


def _exposures(ages, years):
    x = ages.astype(float)
    base = 3.6e5 * np.exp(-0.00032 * x ** 2)
    growth = 1 + 0.003 * (years - years[0])
    fem = base * (1 + 0.25 * (x / 105) ** 2)
    return np.stack([np.outer(fem, growth), np.outer(base, growth)])


def generate(out_dir, spec=None, scheme=None, dlnm_config=None):
    """Write a synthetic dataset and a matching pipeline config into ``out_dir``."""
    spec = spec or SynthSpec()
    scheme = scheme or AgeBucketScheme()
    dlnm_config = dlnm_config or DlnmConfig()
    out = Path(out_dir)
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    seed = spec.seed

    # temperatures
    dates = _days(spec.start_year, spec.end_year)
    base_rng = rngmod.stream(seed, rngmod.SYNTH, 0)
    lo, mid, hi = temperature_path(dates, base_rng)
    stations = []
    for s in range(spec.n_stations):
        r = rngmod.stream(seed, rngmod.SYNTH, 1, s)
        shift = (s - (spec.n_stations - 1) / 2) * 1.2
        noise = 0.6 * r.standard_normal(len(dates))
        stations.append(DailyTemperatureSeries(dates, mid + shift + noise, lo + shift + noise,
                                               hi + shift + noise, source_label=f"ST{s:02d}"))
    national = aggregate_stations(stations)
    lines = ["date,station_id,tmin,tmean,tmax"]
    for d_i, d in enumerate(dates):
        for st in stations:
            lines.append(f"{d},{st.source_label},{float(st.tmin[d_i])!r},{float(st.mean[d_i])!r},{float(st.tmax[d_i])!r}")
    (out / "station_temp.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # mortality trend truth
    ages = np.arange(0, spec.max_age + 1)
    years = np.arange(spec.start_year, spec.end_year + 1)
    trend_rng = rngmod.stream(seed, rngmod.SYNTH, 2)
    A, B, alpha, beta, Y, ts = _lilee_truth(ages, len(years), trend_rng)
    E = _exposures(ages, years)
    logm = (A[None, :, None] + B[None, :, None] * Y[None, None, :, 0]
            + alpha[:, :, None] + beta[:, :, None] * Y[:, 1:].T[:, None, :])

    # temperature response truth and daily allocation weights
    cb_spec = default_cross_basis_spec(national, dlnm_config.max_lag, dlnm_config.var_percentiles,
                                       dlnm_config.lag_knots)
    trange = (float(national.mean.min()), float(national.mean.max()))
    doy = _doy(dates)
    dow = (dates.astype(int) + 3) % 7
    season = 0.04 * np.cos(2 * np.pi * doy / 365.25) - 0.03 * (dow >= 5)
    yidx = np.searchsorted(years, dates.astype("datetime64[Y]").astype(int) + 1970)
    band = mmt_grid(*empirical_quantile(national.mean, [0.01, 0.99]))
    thetas, weights, theta_year, true_mmts = [], [], [], []
    for k in range(len(scheme)):
        th = true_response(cb_spec, k, trange)
        curve = cumulative_curve(th, cb_spec, band, band[0])
        mmt = grid_argmin(curve, band)
        g, _ = daily_log_rr(th, cb_spec, national.mean, mmt)
        raw = np.exp(season + g)
        tot = np.bincount(yidx, raw)
        pi = raw / tot[yidx]
        frac = np.bincount(yidx, pi * -np.expm1(-g))
        thetas.append(th)
        weights.append(pi)
        theta_year.append(frac)
        true_mmts.append(mmt)
    bucket_of_age = scheme.index_of(ages)
    T = 1.0 + np.stack(theta_year)[bucket_of_age]  # (ages, years)
    pois = rngmod.stream(seed, rngmod.SYNTH, 3)
    D = pois.poisson(E * np.exp(logm) * T[None]).astype(float)

    lines = ["year,age,gender,deaths,exposure"]
    for gi, code in enumerate("FM"):
        for ai, a in enumerate(ages):
            for yi, y in enumerate(years):
                lines.append(f"{y},{a},{code},{int(D[gi, ai, yi])},{float(E[gi, ai, yi])!r}")
    (out / "annual_hmd.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    daily = np.zeros((len(GENDERS), len(scheme), len(dates)), dtype=np.int64)
    alloc = rngmod.stream(seed, rngmod.SYNTH, 4)
    for gi in range(len(GENDERS)):
        for k in range(len(scheme)):
            total = D[gi][bucket_of_age == k].sum(axis=0)
            for yi in range(len(years)):
                days = np.flatnonzero(yidx == yi)
                p = weights[k][days]
                daily[gi, k, days] = alloc.multinomial(int(total[yi]), p / p.sum())
    lines = ["date,gender,age,deaths"]
    for d_i, d in enumerate(dates):
        for gi, code in enumerate("FM"):
            for k in range(len(scheme)):
                lines.append(f"{d},{code},{scheme.cuts[k]},{daily[gi, k, d_i]}")
    (out / "daily_deaths.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # climate scenarios, never leaving a gap after the calibration window
    s0 = min(spec.scenario_start, spec.end_year + 1)
    sdates = _days(s0, spec.horizon_end)
    scen_files = []
    for rcp, warming in RCP_WARMING.items():
        for m, (gcm, rcm) in enumerate(CLIMATE_MODELS[:spec.n_models]):
            r = rngmod.stream(seed, rngmod.SYNTH, 5, list(RCP_WARMING).index(rcp), m)
            lo_s, mid_s, hi_s = temperature_path(sdates, r, warming, s0,
                                                 base=12.5 + 0.3 * (m - 0.5) + 0.02 * (s0 - 1980))
            name = f"scenarios/{gcm}_{rcm}_{rcp}.csv"
            write_scenario_temperatures(out / name, DailyTemperatureSeries(sdates, mid_s, lo_s, hi_s),
                                        gcm, rcm, rcp)
            scen_files.append(name)

    truth = {
        "seed": seed,
        "lilee": {"A": A.tolist(), "B": B.tolist(), "alpha": alpha.tolist(), "beta": beta.tolist(),
                  "K": Y[:, 0].tolist(), "kappa": Y[:, 1:].T.tolist()},
        "ts": ts.to_dict(),
        "dlnm": {label: {"theta": th.tolist(), "mmt": mmt}
                 for label, th, mmt in zip(scheme.labels, thetas, true_mmts)},
        "theta_year": {label: fr.tolist() for label, fr in zip(scheme.labels, theta_year)},
        "cross_basis": cb_spec.to_dict(),
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n",
                                    encoding="utf-8")
    ref_start = max(1981, spec.start_year)
    ref_end = min(2010, spec.end_year)
    config = {
        "data": {"daily_deaths": "daily_deaths.csv", "annual": "annual_hmd.csv",
                 "stations": "station_temp.csv", "scenarios": scen_files},
        "calibration": {"start": spec.start_year, "end": spec.end_year},
        "ages": [0, spec.max_age],
        "buckets": list(scheme.cuts),
        "dlnm": dlnm_config.to_dict(),
        "n_sims": 1000,
        "seed": seed,
        "horizon_end": spec.horizon_end,
        "day_sets": {"all": ["all"], "extreme_hot": ["extreme_hot"]},
        "report_ages": [0, 65],
        "heatwave": {"reference": [f"{ref_start}-01-01", f"{ref_end}-12-31"], "p": 0.995},
        "output_dir": "out",
    }
    (out / "config.json").write_text(json.dumps(config, indent=1) + "\n", encoding="utf-8")
    return config
