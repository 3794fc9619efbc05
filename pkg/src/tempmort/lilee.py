"""Two-step conditional maximum-likelihood fit of the Li-Lee model.

``log m[g, x, t] = A[x] + B[x] K[t] + alpha[g, x] + beta[g, x] kappa[g, t]``

The common part is fitted to deaths and temperature-adjusted exposures
summed over genders; the gender parts are then fitted with the common
predictor held fixed. Both steps share one Poisson bilinear fitter using
alternating one-dimensional Newton updates.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import GENDERS
from .errors import ConvergenceError, ValidationError


@dataclass(frozen=True)
class BilinearFit:
    a: np.ndarray
    b: np.ndarray
    k: np.ndarray
    deviance: float
    sweeps: int


@dataclass(frozen=True)
class LiLeeParams:
    ages: np.ndarray
    years: np.ndarray
    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    alpha: np.ndarray  # (2, n_ages), GENDERS order
    beta: np.ndarray
    kappa: np.ndarray  # (2, n_years)

    def log_rates(self, K=None, kappa=None):
        """Log rates on ``(..., gender, age, time)``; ``K``/``kappa`` override the
        fitted periods and may carry leading axes."""
        K = self.K if K is None else np.asarray(K, dtype=float)
        kappa = self.kappa if kappa is None else np.asarray(kappa, dtype=float)
        common = self.A[:, None] + self.B[:, None] * K[..., None, :]
        gender = self.alpha[:, :, None] + self.beta[:, :, None] * kappa[..., :, None, :]
        return common[..., None, :, :] + gender

    def constraint_residuals(self):
        return {
            "sum_K": float(abs(self.K.sum())),
            "sum_B2_minus_1": float(abs((self.B ** 2).sum() - 1)),
            "sum_kappa": [float(abs(v)) for v in self.kappa.sum(axis=1)],
            "sum_beta2_minus_1": [float(abs(v)) for v in (self.beta ** 2).sum(axis=1) - 1],
        }

    def max_constraint_residual(self):
        r = self.constraint_residuals()
        return max(r["sum_K"], r["sum_B2_minus_1"], *r["sum_kappa"], *r["sum_beta2_minus_1"])


def _loglik(D, mu):
    pos = D > 0
    return float(np.sum(D[pos] * np.log(mu[pos])) - mu.sum())


def _deviance(D, mu):
    pos = D > 0
    term = mu - D
    term[pos] += D[pos] * np.log(D[pos] / mu[pos])
    return 2.0 * float(term.sum())


def _normalize(a, b, k):
    """Impose sum(k) = 0, sum(b^2) = 1 and sum(b) >= 0 without changing a + b k."""
    kbar = k.mean()
    a = a + b * kbar
    k = k - kbar
    s = np.sqrt(np.sum(b ** 2))
    if s > 0:
        b = b / s
        k = k * s
    if b.sum() < 0:
        b, k = -b, -k
    return a, b, k


def fit_bilinear(D, ET, offset=None, tol=1e-10, max_sweeps=10_000, step_tol=1e-12):
    """Maximise ``sum D log mu - mu`` with ``mu = ET exp(offset + a_x + b_x k_t)``.

    Alternates Newton updates of ``a``, ``k`` and ``b``, halving any step that
    lowers the likelihood. Stops when the relative deviance change falls
    below ``tol`` or the largest parameter step falls below ``step_tol``.
    """
    D = np.asarray(D, dtype=float)
    ET = np.asarray(ET, dtype=float)
    if D.shape != ET.shape or D.ndim != 2:
        raise ValidationError("deaths and exposures must be matching (ages, years) grids")
    if np.any(ET <= 0):
        raise ValidationError("exposures must be positive")
    zero_rows = np.flatnonzero(D.sum(axis=1) <= 0)
    if zero_rows.size:
        raise ValidationError(f"ages with zero deaths across the window: rows {zero_rows.tolist()}")
    off = np.zeros_like(D) if offset is None else np.asarray(offset, dtype=float)
    base = ET * np.exp(off)

    a = np.log(D.sum(axis=1) / base.sum(axis=1))
    resid = np.log((D + 0.5) / base) - a[:, None]
    u, s, vt = np.linalg.svd(resid, full_matrices=False)
    b = u[:, 0].copy()
    k = s[0] * vt[0]
    if s[0] < 1e-8:
        k = np.zeros_like(k)

    def mu_of(a, b, k):
        return base * np.exp(a[:, None] + b[:, None] * k[None, :])

    mu = mu_of(a, b, k)
    ll = _loglik(D, mu)
    dev = _deviance(D, mu)

    def ascend(update, current):
        nonlocal mu, ll
        a_, b_, k_ = current
        for _ in range(60):
            cand = update(a_, b_, k_)
            cmu = mu_of(*cand)
            cll = _loglik(D, cmu)
            if cll >= ll - 1e-12 * abs(ll):
                mu, ll = cmu, cll
                return cand
            # halve the step
            update = _halved(update, current)
        raise ConvergenceError("likelihood decreased and step halving failed", _deviance(D, mu))

    for sweep in range(1, max_sweeps + 1):
        old = (a.copy(), b.copy(), k.copy())

        def upd_a(a_, b_, k_):
            return a_ + (D - mu).sum(axis=1) / mu.sum(axis=1), b_, k_
        a, b, k = ascend(upd_a, (a, b, k))

        def upd_k(a_, b_, k_):
            den = (mu * b_[:, None] ** 2).sum(axis=0)
            num = ((D - mu) * b_[:, None]).sum(axis=0)
            return a_, b_, k_ + np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        a, b, k = ascend(upd_k, (a, b, k))

        def upd_b(a_, b_, k_):
            den = (mu * k_[None, :] ** 2).sum(axis=1)
            num = ((D - mu) * k_[None, :]).sum(axis=1)
            return a_, b_ + np.divide(num, den, out=np.zeros_like(num), where=den > 0), k_
        a, b, k = ascend(upd_b, (a, b, k))

        new_dev = _deviance(D, mu)
        step = max(np.abs(a - old[0]).max(), np.abs(b - old[1]).max(), np.abs(k - old[2]).max())
        done = abs(dev - new_dev) <= tol * new_dev or step <= step_tol
        dev = new_dev
        if done:
            break
    else:
        raise ConvergenceError(f"no convergence after {max_sweeps} sweeps", dev)

    a, b, k = _normalize(a, b, k)
    return BilinearFit(a, b, k, dev, sweep)


def _halved(update, current):
    def half(a_, b_, k_):
        cand = update(a_, b_, k_)
        return tuple((c + x) / 2 for c, x in zip(cand, current))
    return half


def fit_common(D_agg, E_agg, **kw):
    """Common ``(A, B, K)`` from deaths and adjusted exposures summed over genders."""
    f = fit_bilinear(D_agg, E_agg, **kw)
    return f.a, f.b, f.k


def fit_gender(D_g, ET_g, common, **kw):
    """Gender ``(alpha, beta, kappa)`` with the common predictor as offset."""
    A, B, K = common
    offset = A[:, None] + B[:, None] * K[None, :]
    f = fit_bilinear(D_g, ET_g, offset=offset, **kw)
    return f.a, f.b, f.k


def fit_lilee(data, T=None, **kw):
    """Two-step fit on ``AnnualMortalityData`` with optional exposure factors ``T``
    shaped like the data grid (gender, age, year)."""
    T = np.ones_like(data.exposures) if T is None else np.asarray(T, dtype=float)
    if T.shape != data.exposures.shape:
        raise ValidationError("exposure adjustment grid has the wrong shape")
    ET = data.exposures * T
    A, B, K = fit_common(data.deaths.sum(axis=0), ET.sum(axis=0), **kw)
    parts = [fit_gender(data.deaths[g], ET[g], (A, B, K), **kw) for g in range(len(GENDERS))]
    alpha, beta, kappa = (np.vstack(x) for x in zip(*parts))
    return LiLeeParams(data.ages.copy(), data.years.copy(), A, B, K, alpha, beta, kappa)


def fitted_rates(params):
    """Central rates ``(gender, age, year)``."""
    return np.exp(params.log_rates())


def pearson_residuals(params, D, ET):
    mu = np.asarray(ET, dtype=float) * fitted_rates(params)
    return (np.asarray(D, dtype=float) - mu) / np.sqrt(mu)


def params_to_csv(params):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "index", "value"])
    for name, idx, vals in (("A", params.ages, params.A), ("B", params.ages, params.B),
                            ("K", params.years, params.K)):
        for i, v in zip(idx, vals):
            w.writerow([name, int(i), repr(float(v))])
    for gi, g in enumerate(GENDERS):
        for name, idx, vals in ((f"alpha_{g}", params.ages, params.alpha[gi]),
                                (f"beta_{g}", params.ages, params.beta[gi]),
                                (f"kappa_{g}", params.years, params.kappa[gi])):
            for i, v in zip(idx, vals):
                w.writerow([name, int(i), repr(float(v))])
    return buf.getvalue()


def params_from_csv(text, ages, years):
    series = {}
    body = [line for line in text.splitlines() if not line.startswith("#")]
    for row in csv.DictReader(body):
        series.setdefault(row["series"], []).append(float(row["value"]))
    arr = {k: np.array(v) for k, v in series.items()}
    return LiLeeParams(
        np.asarray(ages), np.asarray(years), arr["A"], arr["B"], arr["K"],
        np.vstack([arr[f"alpha_{g}"] for g in GENDERS]),
        np.vstack([arr[f"beta_{g}"] for g in GENDERS]),
        np.vstack([arr[f"kappa_{g}"] for g in GENDERS]),
    )


def save_params(params, csv_path, manifest_path, extra=None, header=None):
    """Write the parameter CSV (optionally prefixed by a ``#`` header line) and
    its JSON manifest."""
    text = params_to_csv(params)
    if header:
        text = "# " + header.lstrip("# ").rstrip("\n") + "\n" + text
    Path(csv_path).write_text(text, encoding="utf-8")
    manifest = {
        "ages": [int(params.ages[0]), int(params.ages[-1])],
        "years": [int(params.years[0]), int(params.years[-1])],
        "parameters_csv": Path(csv_path).name,
        "constraint_residuals": params.constraint_residuals(),
    }
    if extra:
        manifest.update(extra)
    Path(manifest_path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                   encoding="utf-8")
    return manifest


def load_params(manifest_path):
    manifest_path = Path(manifest_path)
    m = json.loads(manifest_path.read_text(encoding="utf-8"))
    text = (manifest_path.parent / m["parameters_csv"]).read_text(encoding="utf-8")
    ages = np.arange(m["ages"][0], m["ages"][1] + 1)
    years = np.arange(m["years"][0], m["years"][1] + 1)
    return params_from_csv(text, ages, years), m
