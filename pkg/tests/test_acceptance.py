"""Acceptance criteria 1-11.

Each test records one PASS/FAIL/SKIP line, printed at the end of the run.
Criteria that need real observational data read the path of a pipeline
config from ``TEMPMORT_REAL_DATA`` and are skipped when it is unset.
"""

import hashlib
import json
import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from builders import (
    calibration_world,
    daily_dates,
    dlnm_dataset,
    lilee_surface,
    naive_cross_basis,
    naive_cumulative_curve,
    newton_poisson,
    random_glm_problem,
    var_paths,
)
from tempmort import cli
from tempmort.attribution import (
    CLASS_ORDER,
    annual_sum,
    backward_attributed,
    class_masks,
    classify_days,
    daily_log_rr,
    forward_attributable_fraction,
    forward_fraction_by_year,
    uniform_weights,
)
from tempmort.basis import (
    CrossBasisSpec,
    SplineSpec,
    build_cross_basis,
    cumulative_curve,
    log_spaced_lag_knots,
)
from tempmort.data import aggregate_stations, load_station_temperatures
from tempmort.dlnm import fit_dlnm, mmt_grid, relative_risk
from tempmort.forecast import (
    apply_temperature,
    death_prob,
    le_loss,
    life_expectancy,
    project_virtual_rates,
    summarize,
)
from tempmort.glm import fit_poisson_irls
from tempmort.heatwave import detect, reference_thresholds
from tempmort.lilee import fit_lilee
from tempmort.pipeline import PipelineConfig, read_csv
from tempmort.rng import POISSON, stream
from tempmort.timeseries import TsParams, fit_var, simulate_paths

REAL = os.environ.get("TEMPMORT_REAL_DATA")
RESULTS = {}


@contextmanager
def criterion(n, title):
    try:
        yield
    except pytest.skip.Exception:
        RESULTS[n] = f"criterion {n!s:>2} SKIP  {title}"
        raise
    except BaseException:
        RESULTS[n] = f"criterion {n!s:>2} FAIL  {title}"
        raise
    RESULTS[n] = f"criterion {n!s:>2} PASS  {title}"


def test_c01_glm_oracle():
    with criterion(1, "GLM matches Newton oracle"):
        rng = np.random.default_rng(2024)
        problems = [random_glm_problem(rng) for _ in range(20)]
        t0 = time.perf_counter()
        fits = [fit_poisson_irls(X, y, off).coefficients for X, y, off in problems]
        elapsed = time.perf_counter() - t0
        for (X, y, off), b in zip(problems, fits):
            assert np.abs(b - newton_poisson(X, y, off)).max() < 1e-8
        assert elapsed < 1.0


def test_c02_cross_basis_oracle():
    with criterion(2, "cross-basis and cumulative curve match loops"):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            x = rng.normal(15, 6, 60)
            spec = CrossBasisSpec(
                SplineSpec(tuple(np.quantile(x, [0.1, 0.75, 0.9])), (x.min(), x.max())),
                SplineSpec(log_spaced_lag_knots(10, 3), (0.0, 10.0), True), 10)
            cb = build_cross_basis(x, spec)
            naive = naive_cross_basis(x, spec)
            ok = ~np.isnan(naive)
            assert np.array_equal(np.isnan(cb.matrix), ~ok)
            assert np.abs(cb.matrix[ok] - naive[ok]).max() < 1e-10
            theta = rng.normal(0, 0.1, spec.dim)
            grid = np.linspace(x.min() - 2, x.max() + 2, 41)
            ours = cumulative_curve(theta, spec, grid, 15.0)
            assert np.abs(ours - naive_cumulative_curve(theta, spec, grid, 15.0)).max() < 1e-10


def test_c03_dlnm_recovery():
    with criterion(3, "DLNM recovers MMT and curve on 20 synthetic years"):
        stratum, temps, _, theta, mmt = dlnm_dataset(n_years=20, seed=0, base_deaths=200)
        t0 = time.perf_counter()
        fit = fit_dlnm(stratum, temps)
        grid = mmt_grid(fit.quantiles[0.01], fit.quantiles[0.99])
        rr, lo, hi = relative_risk(fit, grid)
        elapsed = time.perf_counter() - t0
        assert abs(fit.mmt - mmt) <= 1.0
        true_rr = np.exp(cumulative_curve(theta, fit.cb_spec, grid, fit.mmt))
        assert np.mean((true_rr >= lo) & (true_rr <= hi)) >= 0.9
        assert elapsed < 30


def test_c04_attribution_identities():
    with criterion(4, "attribution identities"):
        stratum, temps, spec, theta, mmt = dlnm_dataset(n_years=3, seed=5)
        dates = stratum.dates
        years = dates.astype("datetime64[Y]").astype(int) + 1970
        g, _ = daily_log_rr(theta, spec, temps.mean, mmt)
        masks = class_masks(classify_days(temps.mean, mmt,
                                          *np.quantile(temps.mean, [0.025, 0.975])))
        daily, (_, total) = backward_attributed(g, stratum.deaths, years)
        parts = sum(annual_sum(daily, years, masks[c.value])[1] for c in CLASS_ORDER)
        assert np.abs(parts - total).max() <= 1e-9
        _, ftotal = forward_fraction_by_year(g, dates)
        fparts = sum(forward_fraction_by_year(g, dates, masks[c.value])[1] for c in CLASS_ORDER)
        assert np.abs(fparts - ftotal).max() <= 1e-9

        g0, _ = daily_log_rr(np.zeros(spec.dim), spec, temps.mean, mmt)
        assert np.all(backward_attributed(g0, stratum.deaths, years)[1][1] == 0)
        assert np.all(forward_fraction_by_year(g0, dates)[1] == 0)

        one = daily_dates(2001, 1)
        gd = np.zeros(365)
        gd[200] = np.log(2.0)
        assert forward_attributable_fraction(gd, uniform_weights(one)) == 1 / 365


def test_c05_lilee():
    with criterion(5, "Li-Lee constraints, recovery and unit adjustment"):
        data, truth = lilee_surface(seed=1, n_ages=40, n_years=25)
        p = fit_lilee(data)
        assert p.max_constraint_residual() < 1e-10
        sign = np.sign(np.dot(p.B, truth["B"]))
        assert np.abs(p.A - truth["A"]).max() < 1e-5
        assert np.abs(sign * p.B - truth["B"]).max() < 1e-5
        assert np.abs(sign * p.K - truth["K"]).max() < 1e-5
        for g in range(2):
            s = np.sign(np.dot(p.beta[g], truth["beta"][g]))
            assert np.abs(p.alpha[g] - truth["alpha"][g]).max() < 1e-5
            assert np.abs(s * p.beta[g] - truth["beta"][g]).max() < 1e-5
            assert np.abs(s * p.kappa[g] - truth["kappa"][g]).max() < 1e-5
        unit = fit_lilee(data, T=np.ones_like(data.exposures))
        assert unit.max_constraint_residual() < 1e-10
        for name in ("A", "B", "K", "alpha", "beta", "kappa"):
            assert np.array_equal(getattr(unit, name), getattr(p, name)), name


def test_c06_time_series():
    with criterion(6, "VAR recovery and explosive boundary"):
        y, truth = var_paths(10_000)
        fit = fit_var(y[:, 0], y[:, 1], y[:, 2])
        assert fit.delta == pytest.approx(truth["delta"], rel=0.05)
        assert np.allclose(fit.c, truth["c"], rtol=0.05, atol=0)
        assert np.allclose(fit.phi, truth["phi"], rtol=0.05, atol=0)
        err = np.linalg.norm(fit.sigma - truth["sigma"]) / np.linalg.norm(truth["sigma"])
        assert err < 0.1

        rng = np.random.default_rng(1)
        z = np.zeros((100, 3))
        z[:, 0] = np.cumsum(rng.normal(-0.5, 1, 100))
        z[0, 1:] = [5.0, -5.0]
        for t in range(1, 100):
            z[t, 1:] = 1.02 * z[t - 1, 1:] + rng.normal(0, 0.1, 2)
        boom = fit_var(*z.T)
        assert np.all(boom.phi == 1 - 1e-6)
        assert np.all(np.isfinite(boom.sigma))


def _covers(rep, n_sims=1000):
    history, E_next, D_next = calibration_world(rep)
    p = fit_lilee(history)
    ts = fit_var(p.K, p.kappa[0], p.kappa[1])
    paths = simulate_paths(ts, np.r_[p.K[-1], p.kappa[:, -1]], 1, n_sims, seed=rep)
    m = project_virtual_rates(p, paths)[:, 0]
    predicted = stream(rep, POISSON).poisson(m * E_next).sum(axis=(1, 2)).astype(float)
    band = summarize(predicted)
    return band.lo <= D_next.sum() <= band.hi


def test_c07_forecast_calibration_and_coherence():
    with criterion(7, "forecast band calibration and gender coherence"):
        hits = sum(_covers(rep) for rep in range(100))
        assert hits >= 90, hits

        data, _ = lilee_surface(seed=2, n_ages=106, n_years=30)
        p = fit_lilee(data)
        ts = TsParams(-0.8, [0.01, -0.01], [0.7, 0.6],
                      np.array([[0.6, 0.02, 0.0], [0.02, 0.04, 0.01], [0.0, 0.01, 0.05]]))
        paths = simulate_paths(ts, np.r_[p.K[-1], p.kappa[:, -1]], 80, 1000, seed=11)
        m = project_virtual_rates(p, paths)[..., 65]
        ratio = np.log(m[..., 0] / m[..., 1])
        # gender deviations are stationary, so the log-ratio is bounded by
        # alpha difference plus a generous multiple of the stationary spread
        sd = np.sqrt(np.diag(ts.sigma)[1:] / (1 - ts.phi ** 2))
        centre = ts.c / (1 - ts.phi)
        band = (abs(p.alpha[0, 65] - p.alpha[1, 65])
                + np.sum(np.abs(p.beta[:, 65]) * (np.abs(centre) + 8 * sd)))
        assert np.all(np.isfinite(ratio)) and np.abs(ratio).max() < band


def test_c08_life_table():
    with criterion(8, "life-table checks"):
        e = life_expectancy(np.full(106, 0.5), t_max=105)
        assert np.abs(e[:76] - 1.0).max() < 1e-8
        rng = np.random.default_rng(8)
        m = rng.uniform(1e-4, 0.3, 106)
        q = death_prob(m)
        assert np.all(le_loss(q, death_prob(apply_temperature(m, 0.0))) == 0)
        q_tilde = q.copy()
        q_tilde[70] *= 0.9
        assert np.all(q_tilde <= q)
        assert le_loss(q_tilde, q)[0] > 0


def test_c09_heatwave_constructed():
    with criterion(9, "heatwave constructed episode"):
        from tempmort.data import DailyTemperatureSeries
        tmin = np.full(20, 15.0)
        tmax = np.full(20, 25.0)
        tmin[7:12] = 27.0
        tmax[7:12] = 37.0
        dates = np.arange(np.datetime64("2003-07-01"), np.datetime64("2003-07-21"))
        (ep,) = detect(DailyTemperatureSeries(dates, (tmin + tmax) / 2, tmin, tmax), 20.0, 30.0)
        assert ep.duration == 5 and ep.severity == 62.0 and ep.intensity == 14.0


def _real_config():
    if not REAL:
        pytest.skip("TEMPMORT_REAL_DATA is not set")
    return PipelineConfig.load(REAL)


def test_c09_heatwave_real_2003():
    with criterion("9r", "heatwave 2003 on real national data"):
        cfg = _real_config()
        national = aggregate_stations(load_station_temperatures(cfg.data_path("stations")))
        hw = cfg["heatwave"]
        r_min, r_max = reference_thresholds(national, *hw["reference"], hw["p"])
        eps = [e for e in detect(national, r_min, r_max)
               if np.datetime64("2003-06-01") <= e.start <= np.datetime64("2003-09-30")]
        ep = max(eps, key=lambda e: e.duration)
        assert ep.duration == 12
        assert ep.severity == pytest.approx(92, rel=0.05)
        assert ep.intensity == pytest.approx(9.2, rel=0.05)


def test_c10_real_data_anchors(tmp_path):
    with criterion(10, "real-data MMT and attributable fraction bands"):
        _real_config()
        for stage in ("ingest", "fit-dlnm", "attribution"):
            assert cli.main([stage, "--config", REAL, "--out", str(tmp_path)]) == 0
        for path in (tmp_path / "dlnm").glob("fit_*.json"):
            assert 17.0 <= json.loads(path.read_text())["mmt"] <= 21.0, path.name
        strata, _ = read_csv(tmp_path / "ingest" / "strata_daily.csv")
        deaths = {}
        for r in strata:
            y = r["date"][:4]
            for k, v in r.items():
                if k != "date":
                    deaths[(k, y)] = deaths.get((k, y), 0.0) + float(v)
        rows, _ = read_csv(tmp_path / "attribution.csv")
        num, den = {}, {}
        for r in rows:
            if r["class"] == "all":
                d = deaths[(f"{r['gender']}_{r['bucket']}", r["year"])]
                num[r["year"]] = num.get(r["year"], 0.0) + float(r["theta_mean"]) * d
                den[r["year"]] = den.get(r["year"], 0.0) + d
        national = np.array([num[y] / den[y] for y in sorted(num)])
        assert np.mean((national >= 0.06) & (national <= 0.09)) > 0.5


def _digest(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(Path(root).rglob("*")) if p.is_file()}


def test_c11_determinism(tmp_path):
    with criterion(11, "stage reruns are byte-identical"):
        root = tmp_path / "synth"
        assert cli.main(["synthgen", "--out", str(root), "--start-year", "2000",
                         "--end-year", "2004", "--horizon-end", "2008", "--n-sims", "30"]) == 0
        cfg = str(root / "config.json")
        stages = ("ingest", "fit-dlnm", "attribution", "fit-mortality", "forecast",
                  "heatwaves", "report")
        for stage in stages:
            assert cli.main([stage, "--config", cfg]) == 0
        first = _digest(root / "out")
        for stage in stages:
            assert cli.main([stage, "--config", cfg, "--threads", "4"]) == 0
            assert _digest(root / "out") == first, stage
