"""Pipeline stages driven by a declarative JSON config.

Every stage writes its artifacts under the output directory. CSV artifacts
start with a ``#`` provenance line and JSON artifacts carry a ``provenance``
object, both recording the stage config hash, the root seed and the hashes
of the upstream artifacts consumed.
"""

from __future__ import annotations

import glob
import hashlib
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import GENDERS
from . import rng as rngmod
from .attribution import (
    CLASS_ORDER,
    annual_sum,
    attributable_fraction_hist,
    backward_attributed,
    class_masks,
    classify_days,
    daily_log_rr,
    expand_to_ages,
    exposure_adjustment,
    forward_fraction_by_year,
)
from .data import (
    AgeBucketScheme,
    aggregate_stations,
    align,
    load_annual_mortality,
    load_daily_deaths,
    load_scenario_temperatures,
    load_station_temperatures,
)
from .dlnm import DlnmConfig, bootstrap_coeffs, fit_dlnm, load_fit, mmt_grid, relative_risk, save_fit
from .errors import NumericalError, StaleArtifactError, ValidationError
from .forecast import (
    apply_temperature,
    death_prob,
    life_expectancy,
    pair_climate_models,
    project_virtual_rates,
    summarize,
)
from .heatwave import detect, reference_thresholds
from .lilee import fit_lilee, load_params, save_params
from .timeseries import TsParams, fit_var, simulate_paths

log = logging.getLogger(__name__)

DEFAULTS = {
    "calibration": {"start": 1980, "end": 2019},
    "ages": [0, 105],
    "buckets": [0, 65, 75, 85],
    "dlnm": DlnmConfig().to_dict(),
    "n_sims": 1000,
    "seed": 1,
    "horizon_end": 2100,
    "day_sets": {"all": ["all"], "extreme_hot": ["extreme_hot"]},
    "report_ages": [0, 65],
    "heatwave": {"reference": ["1981-01-01", "2010-12-31"], "p": 0.995},
    "output_dir": "out",
    "threads": 1,
}

# config sections each stage depends on; used for stale-artifact detection
STAGE_SECTIONS = {
    "ingest": ("data", "calibration", "buckets"),
    "fit-dlnm": ("data", "calibration", "buckets", "dlnm"),
    "attribution": ("data", "calibration", "buckets", "dlnm", "n_sims", "seed"),
    "fit-mortality": ("data", "calibration", "buckets", "dlnm", "n_sims", "seed", "ages"),
    "forecast": ("data", "calibration", "buckets", "dlnm", "n_sims", "seed", "ages",
                 "horizon_end", "day_sets", "report_ages"),
    "heatwaves": ("data", "calibration", "heatwave"),
    "report": ("data", "calibration", "buckets", "dlnm", "n_sims", "seed", "ages",
               "horizon_end", "day_sets", "report_ages", "heatwave"),
}


@dataclass
class PipelineConfig:
    raw: dict
    base_dir: Path
    out_dir: Path = field(init=False)

    def __post_init__(self):
        merged = json.loads(json.dumps(DEFAULTS))
        for k, v in self.raw.items():
            merged[k] = v
        if "data" not in merged:
            raise ValidationError("config lacks a 'data' section")
        cal = merged["calibration"]
        if int(cal["end"]) < int(cal["start"]):
            raise ValidationError("calibration window is empty")
        if int(merged["n_sims"]) < 1:
            raise ValidationError("n_sims must be >= 1")
        self.raw = merged
        self.out_dir = self.resolve(merged["output_dir"])

    @classmethod
    def load(cls, path, seed=None, out=None, threads=None):
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"no such config file: {path}")
        raw = json.loads(path.read_text(encoding="utf-8"))
        if seed is not None:
            raw["seed"] = int(seed)
        if out is not None:
            raw["output_dir"] = str(Path(out).resolve())
        if threads is not None:
            raw["threads"] = int(threads)
        return cls(raw, path.parent.resolve())

    def __getitem__(self, key):
        return self.raw[key]

    def resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def data_path(self, key):
        return self.resolve(self.raw["data"][key])

    def scenario_paths(self):
        out = []
        for pattern in self.raw["data"].get("scenarios", []):
            matches = sorted(glob.glob(str(self.resolve(pattern))))
            if not matches:
                raise FileNotFoundError(f"no scenario file matches {self.resolve(pattern)}")
            out.extend(matches)
        return out

    @property
    def scheme(self):
        return AgeBucketScheme(tuple(self.raw["buckets"]), int(self.raw["ages"][1]))

    @property
    def dlnm(self):
        return DlnmConfig.from_dict(self.raw["dlnm"])

    @property
    def seed(self):
        return int(self.raw["seed"])

    @property
    def threads(self):
        return max(1, int(self.raw.get("threads", 1)))

    def stage_hash(self, stage):
        sub = {k: self.raw.get(k) for k in STAGE_SECTIONS[stage]}
        blob = json.dumps(sub, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _provenance(cfg, stage, upstream=()):
    return {
        "stage": stage,
        "config_hash": cfg.stage_hash(stage),
        "seed": cfg.seed,
        "upstream": {Path(p).name: file_hash(p) for p in sorted(upstream, key=lambda p: Path(p).name)},
    }


def _prov_line(prov):
    ups = ",".join(f"{k}:{v}" for k, v in prov["upstream"].items())
    return (f"# tempmort stage={prov['stage']} config_hash={prov['config_hash']} "
            f"seed={prov['seed']} upstream={ups or '-'}\n")


def write_csv(path, header, rows, prov):
    buf = io.StringIO()
    buf.write(_prov_line(prov))
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def read_csv(path):
    """Rows of a provenance-prefixed CSV as dicts, plus the provenance fields."""
    import csv
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    prov = {}
    if lines and lines[0].startswith("#"):
        for tok in lines[0][1:].split():
            if "=" in tok:
                k, _, v = tok.partition("=")
                prov[k] = v
        lines = lines[1:]
    return list(csv.DictReader(lines)), prov


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _check_stale(cfg, stage, recorded, what):
    expected = cfg.stage_hash(stage)
    if recorded != expected:
        raise StaleArtifactError(
            f"{what} was produced with config hash {recorded}, current config gives {expected}; "
            f"rerun '{stage}'"
        )


# ---------------------------------------------------------------- ingest

@dataclass
class Inputs:
    temps: object
    strata: list
    paths: list


def load_inputs(cfg):
    """Station temperatures aggregated nationally and strata restricted to the
    calibration window."""
    stations_path = cfg.data_path("stations")
    deaths_path = cfg.data_path("daily_deaths")
    temps = aggregate_stations(load_station_temperatures(stations_path))
    strata = load_daily_deaths(deaths_path, cfg.scheme)
    cal = cfg["calibration"]
    start, end = f"{cal['start']}-01-01", f"{cal['end']}-12-31"
    temps = temps.slice(start, end)
    strata, temps = align(strata, temps)
    if temps.dates[0] != np.datetime64(start) or temps.dates[-1] != np.datetime64(end):
        raise ValidationError(
            f"data cover {temps.dates[0]}..{temps.dates[-1]}, calibration needs {start}..{end}"
        )
    return Inputs(temps, strata, [stations_path, deaths_path])


def cmd_ingest(cfg):
    inp = load_inputs(cfg)
    out = cfg.out_dir / "ingest"
    out.mkdir(parents=True, exist_ok=True)
    prov = _provenance(cfg, "ingest", inp.paths)
    t = inp.temps
    write_csv(out / "national_temp.csv", ["date", "tmin", "tmean", "tmax"],
              zip(t.dates, t.tmin, t.mean, t.tmax), prov)
    header = ["date"] + [f"{s.gender}_{s.bucket}" for s in inp.strata]
    write_csv(out / "strata_daily.csv", header,
              ([d] + [int(s.deaths[i]) for s in inp.strata] for i, d in enumerate(t.dates)), prov)
    return [out / "national_temp.csv", out / "strata_daily.csv"]


# ---------------------------------------------------------------- DLNM

def _stratum_name(key):
    return f"{key[0]}_{key[1]}"


def _map(cfg, fn, items):
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def cmd_fit_dlnm(cfg):
    inp = load_inputs(cfg)
    out = cfg.out_dir / "dlnm"
    out.mkdir(parents=True, exist_ok=True)
    config = cfg.dlnm
    prov = _provenance(cfg, "fit-dlnm", inp.paths)
    fits = _map(cfg, lambda s: fit_dlnm(s, inp.temps, config), inp.strata)
    lo, hi = float(inp.temps.mean.min()), float(inp.temps.mean.max())
    grid = mmt_grid(lo, hi)
    written = []
    for fit in fits:
        name = _stratum_name(fit.stratum)
        save_fit(fit, out / f"fit_{name}.json", {"provenance": prov})
        rr, rlo, rhi = relative_risk(fit, grid)
        write_csv(out / f"rr_{name}.csv", ["temperature", "rr", "rr_lo95", "rr_hi95"],
                  zip(grid, rr, rlo, rhi), prov)
        written += [out / f"fit_{name}.json", out / f"rr_{name}.csv"]
    return written


def load_fits(cfg, strata_keys):
    out = cfg.out_dir / "dlnm"
    fits, paths = [], []
    for key in strata_keys:
        path = out / f"fit_{_stratum_name(key)}.json"
        if not path.exists():
            raise FileNotFoundError(f"missing DLNM fit {path}; run fit-dlnm first")
        doc = json.loads(path.read_text(encoding="utf-8"))
        _check_stale(cfg, "fit-dlnm", doc.get("provenance", {}).get("config_hash"), path.name)
        fits.append(load_fit(path))
        paths.append(path)
    return fits, paths


def stratum_draws(cfg, fit, index):
    return bootstrap_coeffs(fit, cfg["n_sims"], rngmod.stream(cfg.seed, rngmod.BOOTSTRAP, index))


def _calibration_thresholds(fit):
    return fit.quantiles[0.025], fit.quantiles[0.975]


# ---------------------------------------------------------------- attribution

ATTR_HEADER = ["gender", "bucket", "year", "class", "theta_mean", "theta_lo95", "theta_hi95",
               "draws_n"]


def historical_attribution(fit, draws, temps, deaths):
    """Annual attributable fractions per day class for every bootstrap draw.

    Returns ``(years, {class: (n_years, n_draws)})``.
    """
    q025, q975 = _calibration_thresholds(fit)
    masks = class_masks(classify_days(temps.mean, fit.mmt, q025, q975))
    g, _ = daily_log_rr(draws.T, fit, temps.mean)
    years = temps.years
    daily, _ = backward_attributed(g, deaths, years)
    uniq, observed = annual_sum(deaths, years)
    out = {}
    for name, mask in masks.items():
        _, tot = annual_sum(daily, years, mask)
        out[name] = attributable_fraction_hist(tot, observed)
    return uniq, out


def cmd_attribution(cfg):
    inp = load_inputs(cfg)
    fits, fit_paths = load_fits(cfg, [s.key for s in inp.strata])
    rows = []
    for idx, (stratum, fit) in enumerate(zip(inp.strata, fits)):
        draws = stratum_draws(cfg, fit, idx)
        years, fr = historical_attribution(fit, draws, inp.temps, stratum.deaths)
        for name in ["all"] + [c.value for c in CLASS_ORDER]:
            band = np.quantile(fr[name], [0.025, 0.975], axis=1, method="linear")
            mean = fr[name].mean(axis=1)
            for yi, y in enumerate(years):
                rows.append([stratum.gender, stratum.bucket, int(y), name, mean[yi],
                             band[0, yi], band[1, yi], draws.shape[0]])
    path = cfg.out_dir / "attribution.csv"
    write_csv(path, ATTR_HEADER, rows, _provenance(cfg, "attribution", inp.paths + fit_paths))
    return [path]


def load_theta_grid(cfg, ages, years):
    """``(gender, age, year)`` grid of attributed fractions (class 'all', draw mean)."""
    path = cfg.out_dir / "attribution.csv"
    if not path.exists():
        raise FileNotFoundError(f"missing {path}; run attribution first")
    rows, prov = read_csv(path)
    _check_stale(cfg, "attribution", prov.get("config_hash"), path.name)
    scheme = cfg.scheme
    by_bucket = np.full((len(GENDERS), len(scheme), len(years)), np.nan)
    for r in rows:
        if r["class"] != "all":
            continue
        y = int(r["year"])
        if y < years[0] or y > years[-1]:
            continue
        by_bucket[GENDERS.index(r["gender"]), scheme.labels.index(r["bucket"]),
                  y - years[0]] = float(r["theta_mean"])
    if np.any(np.isnan(by_bucket)):
        raise ValidationError("attribution table does not cover every gender/bucket/year")
    return np.stack([expand_to_ages(by_bucket[g], scheme, ages) for g in range(len(GENDERS))]), path


# ---------------------------------------------------------------- mortality

def _annual(cfg):
    cal = cfg["calibration"]
    ages = np.arange(cfg["ages"][0], cfg["ages"][1] + 1)
    years = np.arange(cal["start"], cal["end"] + 1)
    path = cfg.data_path("annual")
    return load_annual_mortality(path, ages, years), path


def cmd_fit_mortality(cfg):
    data, annual_path = _annual(cfg)
    theta, attr_path = load_theta_grid(cfg, data.ages, data.years)
    T = exposure_adjustment(theta)
    out = cfg.out_dir / "mortality"
    out.mkdir(parents=True, exist_ok=True)
    prov = _provenance(cfg, "fit-mortality", [annual_path, attr_path])
    written = []
    for variant, factor in (("adjusted", T), ("unadjusted", np.ones_like(T))):
        params = fit_lilee(data, factor)
        resid = params.max_constraint_residual()
        if resid > 1e-8:
            raise NumericalError(f"{variant} Li-Lee constraint residual {resid:.3g} exceeds 1e-8")
        ts = fit_var(params.K, params.kappa[0], params.kappa[1])
        csv_path = out / f"lilee_{variant}.csv"
        man_path = out / f"lilee_{variant}.json"
        save_params(params, csv_path, man_path, {"provenance": prov, "variant": variant,
                                                 "timeseries": ts.to_dict()},
                    header=_prov_line(prov))
        written += [csv_path, man_path]
    return written


def load_mortality(cfg, variant="adjusted"):
    path = cfg.out_dir / "mortality" / f"lilee_{variant}.json"
    if not path.exists():
        raise FileNotFoundError(f"missing {path}; run fit-mortality first")
    params, manifest = load_params(path)
    _check_stale(cfg, "fit-mortality", manifest["provenance"]["config_hash"], path.name)
    return params, TsParams.from_dict(manifest["timeseries"]), path


# ---------------------------------------------------------------- forecast

FORECAST_HEADER = ["scenario", "rcp", "gender", "year", "age", "metric", "median", "lo95", "hi95"]
METRICS = ("m_tilde", "m_hat", "q", "e", "delta_e")


def _day_set_mask(classes, members):
    masks = class_masks(classes)
    out = np.zeros(len(classes), dtype=bool)
    for m in members:
        if m not in masks:
            raise ValidationError(f"unknown day class {m!r} in day_sets")
        out |= masks[m]
    return out


def scenario_fractions(fit, draws, series, years, day_sets):
    """Projected fractions ``{day_set: (n_years, n_draws)}`` for one scenario,
    with thresholds frozen at calibration values."""
    sl = series.slice(f"{years[0]}-01-01", f"{years[-1]}-12-31")
    if len(sl) == 0 or sl.years[0] != years[0] or sl.years[-1] != years[-1]:
        raise ValidationError(f"scenario {series.source_label} does not cover {years[0]}..{years[-1]}")
    q025, q975 = _calibration_thresholds(fit)
    classes = classify_days(sl.mean, fit.mmt, q025, q975)
    g, _ = daily_log_rr(np.atleast_2d(draws).T, fit, sl.mean)
    out = {}
    for name, members in day_sets.items():
        _, theta = forward_fraction_by_year(g, sl.dates, _day_set_mask(classes, members))
        out[name] = theta
    return out


def forecast_rcp(params, ts, fits, draws, scenarios, years, scheme, day_sets, n_sims, seed,
                 report_ages, chunk=100):
    """Summary bands for one RCP: ``{(day_set, metric): SummaryBand}`` on
    ``(horizon, gender, report_age)``."""
    H = len(years)
    n_models = len(scenarios)
    model_of = pair_climate_models(n_sims, n_models)
    ages = params.ages
    bucket_of_age = scheme.index_of(ages)
    report_idx = np.searchsorted(ages, report_ages)
    # theta[day_set] : (n_sims, H, gender, bucket)
    theta = {name: np.zeros((n_sims, H, len(GENDERS), len(scheme))) for name in day_sets}
    for si, fit in enumerate(fits):
        gi = GENDERS.index(fit.stratum[0])
        k = scheme.labels.index(fit.stratum[1])
        for m, series in enumerate(scenarios):
            sims = np.flatnonzero(model_of == m)
            if sims.size == 0:
                continue
            fr = scenario_fractions(fit, draws[si][sims], series, years, day_sets)
            for name in day_sets:
                theta[name][sims, :, gi, k] = fr[name].T
    last_y = np.r_[params.K[-1], params.kappa[:, -1]]
    collected = {(name, metric): np.empty((n_sims, H, len(GENDERS), len(report_idx)))
                 for name in day_sets for metric in METRICS}
    for start in range(0, n_sims, chunk):
        stop = min(start + chunk, n_sims)
        paths = simulate_paths(ts, last_y, H, stop - start, seed, first_sim=start)
        m_tilde = project_virtual_rates(params, paths)
        q_tilde = death_prob(m_tilde)
        e_tilde = life_expectancy(q_tilde, t_max=int(ages[-1]), first_age=int(ages[0]))
        for name in day_sets:
            th = theta[name][start:stop][..., bucket_of_age]
            m_hat = apply_temperature(m_tilde, th)
            q = death_prob(m_hat)
            e = life_expectancy(q, t_max=int(ages[-1]), first_age=int(ages[0]))
            for metric, arr in (("m_tilde", m_tilde), ("m_hat", m_hat), ("q", q), ("e", e),
                                ("delta_e", e_tilde - e)):
                collected[(name, metric)][start:stop] = arr[..., report_idx]
    if n_sims < 2:
        raise ValidationError("forecast bands need n_sims >= 2")
    return {key: summarize(v, axis=0) for key, v in collected.items()}


def _scenarios_by_rcp(cfg):
    paths = cfg.scenario_paths()
    groups = {}
    for p in paths:
        s = load_scenario_temperatures(p)
        groups.setdefault(s.meta["rcp"], []).append((p, s))
    for rcp in groups:
        groups[rcp].sort(key=lambda ps: ps[1].source_label)
    return groups


def cmd_forecast(cfg):
    params, ts, man_path = load_mortality(cfg, "adjusted")
    scheme = cfg.scheme
    keys = [(g, b) for g in GENDERS for b in scheme.labels]
    fits, fit_paths = load_fits(cfg, keys)
    draws = [stratum_draws(cfg, fit, i) for i, fit in enumerate(fits)]
    years = np.arange(int(params.years[-1]) + 1, int(cfg["horizon_end"]) + 1)
    groups = _scenarios_by_rcp(cfg)
    rows = []
    scen_paths = []
    for rcp in sorted(groups):
        scen_paths += [p for p, _ in groups[rcp]]
        bands = forecast_rcp(params, ts, fits, draws, [s for _, s in groups[rcp]], years, scheme,
                             cfg["day_sets"], cfg["n_sims"], cfg.seed, cfg["report_ages"])
        for name in cfg["day_sets"]:
            for gi, g in enumerate(GENDERS):
                for yi, y in enumerate(years):
                    for ai, a in enumerate(cfg["report_ages"]):
                        for metric in METRICS:
                            b = bands[(name, metric)]
                            rows.append([name, rcp, g, int(y), int(a), metric,
                                         b.median[yi, gi, ai], b.lo[yi, gi, ai],
                                         b.hi[yi, gi, ai]])
    path = cfg.out_dir / "forecast.csv"
    write_csv(path, FORECAST_HEADER, rows,
              _provenance(cfg, "forecast", [man_path] + fit_paths + scen_paths))
    return [path] + cmd_heatwaves(cfg)


# ---------------------------------------------------------------- heatwaves

HEATWAVE_HEADER = ["scenario", "rcp", "start", "end", "duration", "severity", "intensity"]


def cmd_heatwaves(cfg):
    stations_path = cfg.data_path("stations")
    national = aggregate_stations(load_station_temperatures(stations_path))
    hw = cfg["heatwave"]
    r_min, r_max = reference_thresholds(national, hw["reference"][0], hw["reference"][1], hw["p"])
    rows = []
    series = [("observed", "historical", national, stations_path)]
    for rcp, items in sorted(_scenarios_by_rcp(cfg).items()):
        series += [(s.source_label, rcp, s, p) for p, s in items]
    for label, rcp, s, _ in series:
        for ep in detect(s, r_min, r_max):
            rows.append([label, rcp, ep.start, ep.end, ep.duration, ep.severity, ep.intensity])
    path = cfg.out_dir / "heatwaves.csv"
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(path, HEATWAVE_HEADER, rows,
              _provenance(cfg, "heatwaves", sorted({str(p) for *_, p in series})))
    return [path]


# ---------------------------------------------------------------- report

def cmd_report(cfg):
    lines = ["# tempmort report", ""]
    scheme = cfg.scheme
    keys = [(g, b) for g in GENDERS for b in scheme.labels]
    fits, fit_paths = load_fits(cfg, keys)
    lines += ["## Minimum mortality temperatures", "", "| stratum | MMT (C) | dispersion |",
              "|---|---|---|"]
    lines += [f"| {_stratum_name(f.stratum)} | {f.mmt:.1f} | {f.dispersion:.3f} |" for f in fits]
    upstream = list(fit_paths)
    attr = cfg.out_dir / "attribution.csv"
    if attr.exists():
        rows, _ = read_csv(attr)
        upstream.append(attr)
        lines += ["", "## Mean historical attributable fraction (all days)", "",
                  "| stratum | mean theta |", "|---|---|"]
        acc = {}
        for r in rows:
            if r["class"] == "all":
                acc.setdefault((r["gender"], r["bucket"]), []).append(float(r["theta_mean"]))
        lines += [f"| {g}_{b} | {np.mean(v):.4f} |" for (g, b), v in acc.items()]
    for variant in ("adjusted", "unadjusted"):
        path = cfg.out_dir / "mortality" / f"lilee_{variant}.json"
        if path.exists():
            m = json.loads(path.read_text(encoding="utf-8"))
            upstream.append(path)
            tsd = m["timeseries"]
            lines += ["", f"## Time-series parameters ({variant})", "",
                      f"- drift: {tsd['delta']:.4f}",
                      f"- phi female / male: {tsd['phi']['female']:.4f} / {tsd['phi']['male']:.4f}"]
    fc = cfg.out_dir / "forecast.csv"
    if fc.exists():
        rows, _ = read_csv(fc)
        upstream.append(fc)
        last = max(int(r["year"]) for r in rows)
        lines += ["", f"## Life expectancy loss at birth in {last}", "",
                  "| day set | rcp | gender | median | lo95 | hi95 |", "|---|---|---|---|---|---|"]
        for r in rows:
            if r["metric"] == "delta_e" and int(r["year"]) == last and int(r["age"]) == 0:
                lines.append(f"| {r['scenario']} | {r['rcp']} | {r['gender']} | "
                             f"{float(r['median']):.4f} | {float(r['lo95']):.4f} | "
                             f"{float(r['hi95']):.4f} |")
    prov = _provenance(cfg, "report", upstream)
    path = cfg.out_dir / "report.md"
    path.write_text("<!-- " + _prov_line(prov).strip("# \n") + " -->\n" + "\n".join(lines) + "\n",
                    encoding="utf-8")
    return [path]


STAGES = {
    "ingest": cmd_ingest,
    "fit-dlnm": cmd_fit_dlnm,
    "attribution": cmd_attribution,
    "fit-mortality": cmd_fit_mortality,
    "forecast": cmd_forecast,
    "heatwaves": cmd_heatwaves,
    "report": cmd_report,
}
