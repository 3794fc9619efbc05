"""Ingestion and validation of daily deaths, annual mortality and temperature files.

File schemas (UTF-8, comma separated, header row required):

* daily deaths: ``date,gender,age,deaths`` with gender in ``{F, M}``
* annual mortality: ``year,age,gender,deaths,exposure``
* station temperatures: ``date,station_id,tmin,tmean,tmax``
* scenario temperatures: ``date,tmin,tmean,tmax`` preceded by ``# gcm=``,
  ``# rcm=`` and ``# rcp=`` metadata lines
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import GENDERS
from .errors import AlignmentError, MetadataError, ParseError, ValidationError

MAX_AGE = 105
RCPS = ("rcp26", "rcp45", "rcp85")
_GENDER_CODES = {"F": "female", "M": "male"}


def _as_dates(values):
    dates = np.asarray(values, dtype="datetime64[D]")
    if dates.ndim != 1:
        raise ValidationError("dates must be one-dimensional")
    return dates


def _check_contiguous(dates, what="series"):
    if len(dates) == 0:
        raise ValidationError(f"{what} is empty")
    steps = np.diff(dates).astype(int)
    if np.any(steps <= 0):
        bad = dates[1:][steps <= 0][0]
        raise ValidationError(f"{what}: dates not strictly increasing at {bad}")
    if np.any(steps != 1):
        full = np.arange(dates[0], dates[-1] + 1)
        missing = np.setdiff1d(full, dates)
        shown = ", ".join(str(d) for d in missing[:20])
        more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
        raise ValidationError(f"{what}: missing days {shown}{more}")


@dataclass(frozen=True)
class DailyTemperatureSeries:
    dates: np.ndarray
    mean: np.ndarray
    tmin: np.ndarray
    tmax: np.ndarray
    source_label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        dates = _as_dates(self.dates)
        arrays = {}
        for name in ("mean", "tmin", "tmax"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != dates.shape:
                raise ValidationError(f"{name} has {a.size} values for {dates.size} dates")
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{self.source_label or 'series'}: non-finite {name}")
            arrays[name] = a
        _check_contiguous(dates, self.source_label or "temperature series")
        bad = (arrays["tmin"] > arrays["mean"]) | (arrays["mean"] > arrays["tmax"])
        if np.any(bad):
            raise ValidationError(
                f"{self.source_label or 'series'}: min <= mean <= max violated on {dates[bad][0]}"
            )
        object.__setattr__(self, "dates", dates)
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    def __len__(self):
        return len(self.dates)

    @property
    def years(self):
        return self.dates.astype("datetime64[Y]").astype(int) + 1970

    def slice(self, start, end):
        """Restrict to ``start <= date <= end`` (inclusive)."""
        keep = (self.dates >= np.datetime64(start, "D")) & (self.dates <= np.datetime64(end, "D"))
        return DailyTemperatureSeries(
            self.dates[keep], self.mean[keep], self.tmin[keep], self.tmax[keep],
            self.source_label, dict(self.meta),
        )


@dataclass(frozen=True)
class AgeBucketScheme:
    """Ordered lower cut points; the last bucket is open-ended up to ``max_age``."""

    cuts: tuple = (0, 65, 75, 85)
    max_age: int = MAX_AGE

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cuts)
        if not cuts or cuts[0] != 0:
            raise ValidationError("age buckets must start at 0")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValidationError("age bucket cuts must be strictly increasing")
        if cuts[-1] > self.max_age:
            raise ValidationError("last bucket starts above the maximum age")
        object.__setattr__(self, "cuts", cuts)

    @property
    def labels(self):
        out = []
        for i, lo in enumerate(self.cuts):
            if i + 1 < len(self.cuts):
                out.append(f"{lo}-{self.cuts[i + 1] - 1}")
            else:
                out.append(f"{lo}+")
        return tuple(out)

    def __len__(self):
        return len(self.cuts)

    def index_of(self, age):
        age = np.asarray(age)
        if np.any((age < 0) | (age > self.max_age)):
            raise ValidationError(f"age outside 0..{self.max_age}")
        return np.searchsorted(self.cuts, age, side="right") - 1

    def ages_in(self, k):
        lo = self.cuts[k]
        hi = self.cuts[k + 1] - 1 if k + 1 < len(self.cuts) else self.max_age
        return np.arange(lo, hi + 1)


@dataclass(frozen=True)
class DailyStratumSeries:
    gender: str
    bucket: str
    dates: np.ndarray
    deaths: np.ndarray

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise ValidationError(f"unknown gender {self.gender!r}")
        dates = _as_dates(self.dates)
        deaths = np.asarray(self.deaths)
        if deaths.shape != dates.shape:
            raise ValidationError("deaths and dates differ in length")
        if np.any(deaths < 0):
            raise ValidationError("negative death counts")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "deaths", deaths)

    @property
    def key(self):
        return (self.gender, self.bucket)


@dataclass(frozen=True)
class AnnualMortalityData:
    """Deaths and exposures on a rectangular ``(gender, age, year)`` grid.

    Gender axis order follows ``tempmort.GENDERS`` (female, male).
    """

    ages: np.ndarray
    years: np.ndarray
    deaths: np.ndarray
    exposures: np.ndarray

    def __post_init__(self):
        ages = np.asarray(self.ages, dtype=int)
        years = np.asarray(self.years, dtype=int)
        shape = (len(GENDERS), len(ages), len(years))
        deaths = np.asarray(self.deaths, dtype=float)
        exposures = np.asarray(self.exposures, dtype=float)
        if deaths.shape != shape or exposures.shape != shape:
            raise ValidationError(f"expected arrays of shape {shape}")
        if not (np.all(np.isfinite(deaths)) and np.all(np.isfinite(exposures))):
            raise ValidationError("missing or non-finite cells in annual data")
        if np.any(deaths < 0):
            raise ValidationError("negative annual deaths")
        if np.any(exposures <= 0):
            raise ValidationError("exposures must be positive")
        for name, a in (("ages", ages), ("years", years)):
            object.__setattr__(self, name, a)
        object.__setattr__(self, "deaths", deaths)
        object.__setattr__(self, "exposures", exposures)

    def window(self, years=None, ages=None):
        yi = np.arange(len(self.years)) if years is None else np.searchsorted(self.years, years)
        ai = np.arange(len(self.ages)) if ages is None else np.searchsorted(self.ages, ages)
        if years is not None and not np.array_equal(self.years[yi], years):
            raise ValidationError("requested years not all present in annual data")
        if ages is not None and not np.array_equal(self.ages[ai], ages):
            raise ValidationError("requested ages not all present in annual data")
        return AnnualMortalityData(
            self.ages[ai], self.years[yi],
            self.deaths[:, ai][:, :, yi], self.exposures[:, ai][:, :, yi],
        )


def _open_rows(path, required):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    meta = {}
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            body_start = i + 1
        else:
            break
    reader = csv.reader(lines[body_start:])
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("missing header row", path=path) from None
    missing = [c for c in required if c not in header]
    if missing:
        raise ParseError(f"header lacks columns {missing}", line=body_start + 1, path=path)
    idx = [header.index(c) for c in required]
    rows = []
    for offset, row in enumerate(reader):
        lineno = body_start + 2 + offset
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno, path)
        rows.append((lineno, [row[i].strip() for i in idx]))
    return meta, rows


def _parse(fn, text, what, lineno, path):
    try:
        return fn(text)
    except ValueError:
        raise ParseError(f"bad {what} {text!r}", lineno, path) from None


def load_daily_deaths(path, scheme=None):
    """Aggregate a daily-deaths file into one series per (gender, age bucket).

    Days absent from the file inside its date range count as zero deaths.
    """
    scheme = scheme or AgeBucketScheme()
    _, rows = _open_rows(path, ["date", "gender", "age", "deaths"])
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    n = len(rows)
    dates = np.empty(n, dtype="datetime64[D]")
    gidx = np.empty(n, dtype=int)
    ages = np.empty(n, dtype=int)
    counts = np.empty(n, dtype=np.int64)
    for i, (lineno, (d, g, a, c)) in enumerate(rows):
        dates[i] = _parse(np.datetime64, d, "date", lineno, path)
        if g not in _GENDER_CODES:
            raise ParseError(f"bad gender {g!r} (expected F or M)", lineno, path)
        gidx[i] = GENDERS.index(_GENDER_CODES[g])
        ages[i] = _parse(int, a, "age", lineno, path)
        if not 0 <= ages[i] <= scheme.max_age:
            raise ValidationError(f"{path}:{lineno}: age {ages[i]} outside 0..{scheme.max_age}")
        counts[i] = _parse(int, c, "deaths", lineno, path)
        if counts[i] < 0:
            raise ValidationError(f"{path}:{lineno}: negative deaths")
    axis = np.arange(dates.min(), dates.max() + 1)
    day = (dates - axis[0]).astype(int)
    bucket = scheme.index_of(ages)
    grid = np.zeros((len(GENDERS), len(scheme), len(axis)), dtype=np.int64)
    np.add.at(grid, (gidx, bucket, day), counts)
    return [
        DailyStratumSeries(g, label, axis, grid[gi, k])
        for gi, g in enumerate(GENDERS)
        for k, label in enumerate(scheme.labels)
    ]


def load_annual_mortality(path, ages=None, years=None):
    _, rows = _open_rows(path, ["year", "age", "gender", "deaths", "exposure"])
    cells = {}
    for lineno, (y, a, g, d, e) in rows:
        if g not in _GENDER_CODES:
            raise ParseError(f"bad gender {g!r}", lineno, path)
        key = (GENDERS.index(_GENDER_CODES[g]), _parse(int, a, "age", lineno, path),
               _parse(int, y, "year", lineno, path))
        if key in cells:
            raise ValidationError(f"{path}:{lineno}: duplicate cell {key}")
        cells[key] = (_parse(float, d, "deaths", lineno, path),
                      _parse(float, e, "exposure", lineno, path))
    all_ages = np.array(sorted({k[1] for k in cells}))
    all_years = np.array(sorted({k[2] for k in cells}))
    ages = all_ages if ages is None else np.asarray(ages, dtype=int)
    years = all_years if years is None else np.asarray(years, dtype=int)
    deaths = np.full((len(GENDERS), len(ages), len(years)), np.nan)
    exposures = np.full_like(deaths, np.nan)
    for gi in range(len(GENDERS)):
        for ai, a in enumerate(ages):
            for yi, y in enumerate(years):
                cell = cells.get((gi, int(a), int(y)))
                if cell is None:
                    raise ValidationError(
                        f"{path}: missing cell gender={GENDERS[gi]} age={a} year={y}"
                    )
                deaths[gi, ai, yi], exposures[gi, ai, yi] = cell
    return AnnualMortalityData(ages, years, deaths, exposures)


def load_station_temperatures(path):
    _, rows = _open_rows(path, ["date", "station_id", "tmin", "tmean", "tmax"])
    by_station = {}
    for lineno, (d, sid, lo, mid, hi) in rows:
        by_station.setdefault(sid, []).append((
            _parse(np.datetime64, d, "date", lineno, path),
            _parse(float, lo, "tmin", lineno, path),
            _parse(float, mid, "tmean", lineno, path),
            _parse(float, hi, "tmax", lineno, path),
        ))
    out = []
    for sid in sorted(by_station):
        recs = sorted(by_station[sid], key=lambda r: r[0])
        dates, lo, mid, hi = zip(*recs)
        out.append(DailyTemperatureSeries(np.array(dates), mid, lo, hi, source_label=sid))
    return out


def aggregate_stations(series):
    """Per-day arithmetic mean of mean/min/max temperatures across stations."""
    series = list(series)
    if not series:
        raise ValidationError("no stations to aggregate")
    ref = series[0].dates
    for s in series[1:]:
        if not np.array_equal(s.dates, ref):
            raise AlignmentError(
                f"station {s.source_label!r} date axis differs from {series[0].source_label!r}"
            )
    # sorted station order makes the float sum independent of input order
    series = sorted(series, key=lambda s: s.source_label)
    stack = {name: np.mean([getattr(s, name) for s in series], axis=0)
             for name in ("mean", "tmin", "tmax")}
    return DailyTemperatureSeries(ref, stack["mean"], stack["tmin"], stack["tmax"],
                                  source_label="national")


def empirical_quantile(values, p):
    """Sample quantile interpolating linearly between order statistics at 1+(n-1)p."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("empirical_quantile of empty input")
    if not np.all(np.isfinite(values)):
        raise ValueError("empirical_quantile requires finite values")
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("quantile level must lie in [0, 1]")
    return np.quantile(values, p, method="linear")


def load_scenario_temperatures(path):
    meta, rows = _open_rows(path, ["date", "tmin", "tmean", "tmax"])
    for key in ("gcm", "rcm", "rcp"):
        if not meta.get(key):
            raise MetadataError(f"{path}: missing '# {key}=' metadata line")
    if meta["rcp"] not in RCPS:
        raise MetadataError(f"{path}: rcp {meta['rcp']!r} not in {RCPS}")
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    dates, lo, mid, hi = [], [], [], []
    for lineno, (d, a, b, c) in rows:
        dates.append(_parse(np.datetime64, d, "date", lineno, path))
        lo.append(_parse(float, a, "tmin", lineno, path))
        mid.append(_parse(float, b, "tmean", lineno, path))
        hi.append(_parse(float, c, "tmax", lineno, path))
    label = f"{meta['gcm']}/{meta['rcm']}"
    return DailyTemperatureSeries(np.array(dates, dtype="datetime64[D]"), mid, lo, hi,
                                  source_label=label, meta=dict(meta))


def write_scenario_temperatures(path, series, gcm, rcm, rcp):
    if rcp not in RCPS:
        raise MetadataError(f"rcp {rcp!r} not in {RCPS}")
    lines = [f"# gcm={gcm}", f"# rcm={rcm}", f"# rcp={rcp}", "date,tmin,tmean,tmax"]
    for d, a, b, c in zip(series.dates, series.tmin, series.mean, series.tmax):
        lines.append(f"{d},{float(a)!r},{float(b)!r},{float(c)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def align(strata, temps):
    """Restrict stratum series and temperatures to their common date range."""
    start = max([temps.dates[0]] + [s.dates[0] for s in strata])
    end = min([temps.dates[-1]] + [s.dates[-1] for s in strata])
    if end < start:
        raise AlignmentError("death and temperature series do not overlap")
    out = []
    for s in strata:
        keep = (s.dates >= start) & (s.dates <= end)
        if not np.array_equal(s.dates[keep], np.arange(start, end + 1)):
            raise AlignmentError(f"stratum {s.key} has gaps in the common window")
        out.append(DailyStratumSeries(s.gender, s.bucket, s.dates[keep], s.deaths[keep]))
    return out, temps.slice(start, end)
