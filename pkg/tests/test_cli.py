import hashlib
import json
import shutil

import numpy as np
import pytest

from tempmort import cli
from tempmort.attribution import daily_log_rr
from tempmort.dlnm import load_fit
from tempmort.errors import NumericalError
from tempmort.forecast import project_virtual_rates
from tempmort.lilee import fit_lilee, load_params
from tempmort.pipeline import STAGES, PipelineConfig, _annual, read_csv
from tempmort.timeseries import TsParams, simulate_paths

STAGE_ORDER = ("ingest", "fit-dlnm", "attribution", "fit-mortality", "forecast", "heatwaves",
               "report")


def _run(*args):
    return cli.main([str(a) for a in args])


def _digest(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    assert _run("synthgen", "--out", root, "--start-year", 2000, "--end-year", 2005,
                "--horizon-end", 2010, "--n-sims", 40) == 0
    cfg = root / "config.json"
    for stage in STAGE_ORDER:
        assert _run(stage, "--config", cfg) == 0, stage
    return root, cfg


def test_all_artifacts_written(workspace):
    root, _ = workspace
    out = root / "out"
    assert len(list((out / "dlnm").glob("fit_*.json"))) == 8
    assert len(list((out / "dlnm").glob("rr_*.csv"))) == 8
    for name in ("attribution.csv", "forecast.csv", "heatwaves.csv", "report.md",
                 "mortality/lilee_adjusted.json", "mortality/lilee_unadjusted.csv"):
        assert (out / name).exists(), name


def test_headers_carry_hash_and_seed(workspace):
    root, _ = workspace
    for p in (root / "out").rglob("*"):
        if p.suffix == ".csv":
            first = p.read_text().splitlines()[0]
            assert first.startswith("# tempmort") and "config_hash=" in first and "seed=" in first
        elif p.suffix == ".json":
            prov = json.loads(p.read_text())["provenance"]
            assert prov["config_hash"] and prov["seed"] == 2024
        elif p.suffix == ".md":
            assert "config_hash=" in p.read_text().splitlines()[0]


def test_mmts_inside_search_band(workspace):
    root, _ = workspace
    for p in (root / "out" / "dlnm").glob("fit_*.json"):
        fit = load_fit(p)
        assert fit.quantiles[0.01] <= fit.mmt <= fit.quantiles[0.99]


def test_reruns_are_byte_identical(workspace, tmp_path):
    root, cfg = workspace
    before = _digest(root / "out")
    for stage in STAGE_ORDER:
        assert _run(stage, "--config", cfg, "--threads", 3) == 0
    assert _digest(root / "out") == before


def test_fresh_directory_reproduces(workspace, tmp_path):
    root, cfg = workspace
    other = tmp_path / "again"
    for stage in STAGE_ORDER:
        assert _run(stage, "--config", cfg, "--out", other) == 0
    assert _digest(other) == _digest(root / "out")


def test_missing_temperature_file_exit_2(workspace, tmp_path, capsys):
    root, _ = workspace
    doc = json.loads((root / "config.json").read_text())
    doc["data"]["stations"] = str(tmp_path / "absent_temps.csv")
    doc["data"]["daily_deaths"] = str(root / doc["data"]["daily_deaths"])
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert _run("fit-dlnm", "--config", bad, "--out", tmp_path / "o") == 2
    assert "absent_temps.csv" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert _run("ingest", "--config", tmp_path / "nope.json") == 2


def test_stale_fits_rejected(workspace, tmp_path, capsys):
    root, cfg = workspace
    out = tmp_path / "copy"
    shutil.copytree(root / "out", out)
    doc = json.loads(cfg.read_text())
    doc["dlnm"]["max_lag"] = 14
    changed = root / "changed.json"
    changed.write_text(json.dumps(doc))
    try:
        assert _run("attribution", "--config", changed, "--out", out) == 2
        assert "config hash" in capsys.readouterr().err
    finally:
        changed.unlink()


def test_numerical_failure_exit_3(monkeypatch, workspace):
    def boom(cfg):
        raise NumericalError("singular")
    monkeypatch.setitem(STAGES, "report", boom)
    assert _run("report", "--config", workspace[1]) == 3


def _doctored(workspace, tmp_path, scale):
    """Copy of the outputs where every fit has coefficients ``scale * theta``
    and zero covariance, so every bootstrap draw equals the point estimate."""
    root, cfg = workspace
    out = tmp_path / "doctored"
    shutil.copytree(root / "out", out)
    for p in (out / "dlnm").glob("fit_*.json"):
        doc = json.loads(p.read_text())
        doc["theta"] = [scale * v for v in doc["theta"]]
        doc["theta_cov"] = [0.0] * len(doc["theta_cov"])
        p.write_text(json.dumps(doc))
    assert _run("attribution", "--config", cfg, "--out", out) == 0
    return out


def test_attribution_zero_effect_through_cli(workspace, tmp_path):
    out = _doctored(workspace, tmp_path, 0.0)
    rows, _ = read_csv(out / "attribution.csv")
    assert rows and all(float(r["theta_mean"]) == 0.0 for r in rows)


def test_attribution_matches_loop_oracle_through_cli(workspace, tmp_path):
    root, cfg = workspace
    out = _doctored(workspace, tmp_path, 1.0)
    rows, _ = read_csv(out / "attribution.csv")
    fit = load_fit(out / "dlnm" / "fit_male_75-84.json")
    temps, _ = read_csv(root / "out" / "ingest" / "national_temp.csv")
    strata, _ = read_csv(root / "out" / "ingest" / "strata_daily.csv")
    tmean = np.array([float(r["tmean"]) for r in temps])
    deaths = np.array([float(r["male_75-84"]) for r in strata])
    g, _ = daily_log_rr(fit.theta, fit, tmean)
    num = den = 0.0
    for d, r in enumerate(strata):
        if r["date"].startswith("2003"):
            num += (1.0 - np.exp(-g[d])) * deaths[d]
            den += deaths[d]
    cell = [r for r in rows if r["gender"] == "male" and r["bucket"] == "75-84"
            and r["year"] == "2003" and r["class"] == "all"]
    assert float(cell[0]["theta_mean"]) == pytest.approx(num / den, rel=1e-12)
    assert float(cell[0]["theta_lo95"]) == pytest.approx(num / den, rel=1e-12)


def test_mortality_stage_constraints_and_unit_variant(workspace):
    root, cfg = workspace
    out = root / "out" / "mortality"
    conf = PipelineConfig.load(cfg)
    data, _ = _annual(conf)
    raw = fit_lilee(data)
    for variant in ("adjusted", "unadjusted"):
        params, manifest = load_params(out / f"lilee_{variant}.json")
        assert params.max_constraint_residual() < 1e-10
    unadj, _ = load_params(out / "lilee_unadjusted.json")
    assert np.array_equal(unadj.kappa, raw.kappa) and np.array_equal(unadj.B, raw.B)


def test_forecast_bands_ordered_and_cell_recomputed(workspace):
    root, cfg = workspace
    rows, _ = read_csv(root / "out" / "forecast.csv")
    lo = np.array([float(r["lo95"]) for r in rows])
    med = np.array([float(r["median"]) for r in rows])
    hi = np.array([float(r["hi95"]) for r in rows])
    assert np.all(lo <= med) and np.all(med <= hi)
    assert {r["metric"] for r in rows} == {"m_tilde", "m_hat", "q", "e", "delta_e"}
    assert {r["scenario"] for r in rows} == {"all", "extreme_hot"}

    params, manifest = load_params(root / "out" / "mortality" / "lilee_adjusted.json")
    ts = TsParams.from_dict(manifest["timeseries"])
    last = np.r_[params.K[-1], params.kappa[:, -1]]
    paths = simulate_paths(ts, last, 1, 40, seed=2024)
    m = project_virtual_rates(params, paths)[:, 0, 0, 65]
    cell = [r for r in rows if r["scenario"] == "all" and r["rcp"] == "rcp45"
            and r["gender"] == "female" and r["year"] == "2006" and r["age"] == "65"
            and r["metric"] == "m_tilde"]
    assert float(cell[0]["median"]) == pytest.approx(np.median(m), rel=1e-12)


def test_heatwave_table_has_observed_and_scenarios(workspace):
    root, _ = workspace
    rows, _ = read_csv(root / "out" / "heatwaves.csv")
    kinds = {r["rcp"] for r in rows}
    assert "historical" in kinds and kinds & {"rcp26", "rcp45", "rcp85"}
    for r in rows:
        assert int(r["duration"]) >= 1 and float(r["intensity"]) >= 0
