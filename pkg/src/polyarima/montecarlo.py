"""Paired Monte Carlo comparison of the baseline and second-order estimators.

Every (model, sample size, innovation law) cell simulates ``replications``
series; each requested estimator fits the identical series, so efficiency
ratios are paired. Seeds form a counter-based tree below ``root_seed``:
replication (cell, r) draws from SeedSequence(root_seed, spawn_key=(0, cell,
r)) and the cell's bootstrap from spawn_key=(1, cell). Results therefore do
not depend on the worker count or on scheduling, and serialized reports are
byte-identical across runs. Wall-clock timings are deliberately kept out of
the report files for the same reason.
"""
from __future__ import annotations

import csv
import io
import json
import os
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import arima, innovations as innov_mod
from .arima import ModelSpec
from .baseline import BaselineFit, css_estimate, ols_ar
from .exceptions import ConfigError, PolyarimaError
from .innovations import InnovationSpec
from .moments import sample_moments
from .numfmt import fmt, jsonable
from .pmm2 import FitConfig, second_stage
from .asymptotics import re_theoretical, sandwich

SCHEMA_VERSION = 1
WORKERS_ENV = "POLYARIMA_WORKERS"
_ESTIMATORS = ("ols", "css", "pmm2")
_BLOCK = 64  # replications per worker task
_Z_95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple[ModelSpec, ...]
    sample_sizes: tuple[int, ...]
    innovations: tuple[InnovationSpec, ...]
    replications: int = 500
    bootstrap_resamples: int = 1000
    root_seed: int = 0
    estimators: tuple[str, ...] = ("css", "pmm2")
    burn_in: int = 200
    intercept: bool = False

    def __post_init__(self):
        if not self.models:
            raise ConfigError("models", "at least one model is required")
        if not self.sample_sizes:
            raise ConfigError("sample_sizes", "at least one sample size is required")
        if not self.innovations:
            raise ConfigError("innovations", "at least one innovation law is required")
        for i, n in enumerate(self.sample_sizes):
            if n < 30:
                raise ConfigError(f"sample_sizes[{i}]", f"must be >= 30, got {n}")
        if self.replications < 30:
            raise ConfigError("replications", f"must be >= 30 for bootstrap validity, got {self.replications}")
        if self.bootstrap_resamples < 1:
            raise ConfigError("bootstrap_resamples", "must be >= 1")
        if self.burn_in < 0:
            raise ConfigError("burn_in", "must be >= 0")
        if self.root_seed < 0:
            raise ConfigError("root_seed", "must be >= 0")
        if not self.estimators:
            raise ConfigError("estimators", "at least one estimator is required")
        for i, est in enumerate(self.estimators):
            if est not in _ESTIMATORS:
                raise ConfigError(f"estimators[{i}]", f"unknown estimator {est!r}")
        if "pmm2" in self.estimators and not ({"ols", "css"} & set(self.estimators)):
            raise ConfigError("estimators", "pmm2 needs a baseline companion (ols or css)")
        for i, m in enumerate(self.models):
            if not arima.is_admissible(m):
                raise ConfigError(f"models[{i}]", "model is not stationary/invertible")
            if "ols" in self.estimators and m.q > 0:
                raise ConfigError(f"models[{i}]", "ols requires q = 0")

    def to_dict(self) -> dict:
        return {
            "models": [
                {"p": m.p, "d": m.d, "q": m.q, "phi": list(m.phi),
                 "theta": list(m.theta), "intercept": m.intercept}
                for m in self.models
            ],
            "sample_sizes": list(self.sample_sizes),
            "innovations": [{"kind": s.kind, "params": dict(s.params)} for s in self.innovations],
            "replications": self.replications,
            "bootstrap_resamples": self.bootstrap_resamples,
            "root_seed": self.root_seed,
            "estimators": list(self.estimators),
            "burn_in": self.burn_in,
            "intercept": self.intercept,
        }


def _want(entry: dict, key: str, path: str, kind, default=None, required=False):
    if key not in entry:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    val = entry[key]
    if kind is int and isinstance(val, bool):
        raise ConfigError(f"{path}.{key}" if path else key, "expected an integer")
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}" if path else key,
                          f"expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}")
    return val


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate a configuration; errors carry the offending path."""
    if not isinstance(raw, dict):
        raise ConfigError("$", "configuration must be a JSON object")
    known = {"models", "sample_sizes", "innovations", "replications",
             "bootstrap_resamples", "root_seed", "estimators", "burn_in", "intercept"}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown field")

    models_raw = _want(raw, "models", "", list, required=True)
    models = []
    for i, entry in enumerate(models_raw):
        path = f"models[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(path, "expected an object")
        p = _want(entry, "p", path, int, required=True)
        d = _want(entry, "d", path, int, required=True)
        q = _want(entry, "q", path, int, required=True)
        phi = _want(entry, "phi", path, list, default=[])
        theta = _want(entry, "theta", path, list, default=[])
        icpt = entry.get("intercept")
        try:
            models.append(ModelSpec.from_orders(p, d, q, phi, theta, icpt))
        except PolyarimaError as exc:
            raise ConfigError(path, str(exc)) from None

    sizes = _want(raw, "sample_sizes", "", list, required=True)
    for i, n in enumerate(sizes):
        if isinstance(n, bool) or not isinstance(n, int):
            raise ConfigError(f"sample_sizes[{i}]", "expected an integer")

    laws_raw = _want(raw, "innovations", "", list, required=True)
    laws = []
    for i, entry in enumerate(laws_raw):
        path = f"innovations[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(path, "expected an object")
        kind = _want(entry, "kind", path, str, required=True)
        params = _want(entry, "params", path, dict, default={})
        try:
            laws.append(InnovationSpec(kind, params))
        except PolyarimaError as exc:
            raise ConfigError(path, str(exc)) from None

    estimators = _want(raw, "estimators", "", list, default=["css", "pmm2"])
    try:
        return ExperimentConfig(
            models=tuple(models),
            sample_sizes=tuple(sizes),
            innovations=tuple(laws),
            replications=_want(raw, "replications", "", int, default=500),
            bootstrap_resamples=_want(raw, "bootstrap_resamples", "", int, default=1000),
            root_seed=_want(raw, "root_seed", "", int, default=0),
            estimators=tuple(estimators),
            burn_in=_want(raw, "burn_in", "", int, default=200),
            intercept=bool(_want(raw, "intercept", "", bool, default=False)),
        )
    except ConfigError:
        raise
    except PolyarimaError as exc:
        raise ConfigError("$", str(exc)) from None


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from None
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# replication level


@dataclass
class _RepResult:
    ok: bool
    reason: str | None = None
    errors: dict[str, np.ndarray] = field(default_factory=dict)
    se: dict[str, np.ndarray] = field(default_factory=dict)
    covered: dict[str, np.ndarray] = field(default_factory=dict)
    fallback: bool = False
    resid_gamma3: float = np.nan


def _truth_vector(model: ModelSpec, intercept: bool) -> np.ndarray:
    t = list(model.phi) + list(model.theta)
    if intercept:
        t.append(model.intercept if model.intercept is not None else 0.0)
    return np.asarray(t, dtype=float)


def _param_names(model: ModelSpec, intercept: bool) -> list[str]:
    names = [f"phi{i}" for i in range(1, model.p + 1)]
    names += [f"theta{j}" for j in range(1, model.q + 1)]
    if intercept:
        names.append("intercept")
    return names


def _run_replication(config: ExperimentConfig, model: ModelSpec, n: int,
                     law: InnovationSpec, cell_idx: int, rep_idx: int) -> _RepResult:
    out = _RepResult(ok=True)
    truth = _truth_vector(model, config.intercept)
    try:
        ss = np.random.SeedSequence(config.root_seed, spawn_key=(0, cell_idx, rep_idx))
        eps = innov_mod.sample(law, n + config.burn_in, ss)
        y = arima.simulate(model, eps, config.burn_in)
        z = arima.difference(y, model.d)

        baseline_fit: BaselineFit | None = None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for est in config.estimators:
                if est == "pmm2":
                    continue
                if est == "ols":
                    bfit = ols_ar(z, model.p, intercept=config.intercept)
                else:
                    bfit = css_estimate(z, model.p, model.q, intercept=config.intercept)
                if not bfit.converged:
                    return _RepResult(ok=False, reason=f"{est} did not converge")
                err = np.asarray(bfit.theta_hat, dtype=float) - truth
                out.errors[est] = err
                out.se[est] = np.asarray(bfit.se, dtype=float)
                out.covered[est] = np.abs(err) <= _Z_95 * out.se[est]
                if est == "css" or baseline_fit is None:
                    baseline_fit = bfit

            if "pmm2" in config.estimators:
                if baseline_fit is None:
                    baseline_fit = css_estimate(z, model.p, model.q, intercept=config.intercept)
                pfit = second_stage(z, baseline_fit, FitConfig(intercept=config.intercept))
                if not pfit.converged:
                    return _RepResult(ok=False, reason="pmm2 did not converge")
                err = np.asarray(pfit.theta_hat, dtype=float) - truth
                out.errors["pmm2"] = err
                if pfit.fallback_used or pfit.design is None:
                    out.se["pmm2"] = np.asarray(baseline_fit.se, dtype=float)
                else:
                    out.se["pmm2"] = sandwich(pfit, pfit.design).se
                out.covered["pmm2"] = np.abs(err) <= _Z_95 * out.se["pmm2"]
                out.fallback = pfit.fallback_used
                if pfit.residuals is not None:
                    try:
                        out.resid_gamma3 = sample_moments(pfit.residuals).gamma3
                    except PolyarimaError:
                        pass
    except (PolyarimaError, np.linalg.LinAlgError) as exc:
        return _RepResult(ok=False, reason=f"{type(exc).__name__}: {exc}")
    return out


def _run_block(config: ExperimentConfig, model: ModelSpec, n: int, law: InnovationSpec,
               cell_idx: int, start: int, stop: int) -> list[_RepResult]:
    return [_run_replication(config, model, n, law, cell_idx, r) for r in range(start, stop)]


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class ParamStats:
    name: str
    truth: float
    bias: float
    bias_ci: tuple[float, float]
    mse: float
    mse_ci: tuple[float, float]
    rmse: float
    mae: float
    coverage95: float


@dataclass
class ReRow:
    name: str
    value: float
    ci: tuple[float, float]


@dataclass
class CellReport:
    model_index: int
    model_label: str
    model: dict
    n: int
    innovation_label: str
    innovation: dict
    replications: int
    failures: int
    failure_reasons: dict[str, int]
    valid: bool
    estimators: dict[str, list[ParamStats]]
    re: list[ReRow]
    re_baseline: str | None
    fallback_rate: float
    residual_gamma3_mean: float


@dataclass
class MCReport:
    schema_version: int
    config: dict
    cells: list[CellReport]

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "cells": [_cell_dict(c) for c in self.cells],
        }


def _cell_dict(c: CellReport) -> dict:
    return {
        "model_index": c.model_index,
        "model_label": c.model_label,
        "model": c.model,
        "n": c.n,
        "innovation": c.innovation_label,
        "innovation_spec": c.innovation,
        "replications": c.replications,
        "failures": c.failures,
        "failure_reasons": c.failure_reasons,
        "valid": c.valid,
        "estimators": {
            est: [
                {"parameter": s.name, "truth": s.truth, "bias": s.bias,
                 "bias_ci": list(s.bias_ci), "mse": s.mse, "mse_ci": list(s.mse_ci),
                 "rmse": s.rmse, "mae": s.mae, "coverage95": s.coverage95}
                for s in stats
            ]
            for est, stats in c.estimators.items()
        },
        "re": [{"parameter": r.name, "value": r.value, "ci": list(r.ci)} for r in c.re],
        "re_baseline": c.re_baseline,
        "fallback_rate": c.fallback_rate,
        "residual_gamma3_mean": c.residual_gamma3_mean,
    }


def _percentile_ci(boot: np.ndarray) -> tuple[float, float]:
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return float(lo), float(hi)


def _aggregate_cell(config: ExperimentConfig, model: ModelSpec, model_index: int, n: int,
                    law: InnovationSpec, cell_idx: int, results: list[_RepResult]) -> CellReport:
    names = _param_names(model, config.intercept)
    truth = _truth_vector(model, config.intercept)
    valid = [r for r in results if r.ok]
    failures = len(results) - len(valid)
    reasons = Counter(r.reason for r in results if not r.ok)
    r_count = len(valid)

    est_stats: dict[str, list[ParamStats]] = {}
    re_rows: list[ReRow] = []
    re_baseline = None
    fallback_rate = float("nan")
    g3_mean = float("nan")

    if r_count >= 2:
        rng = np.random.default_rng(
            np.random.SeedSequence(config.root_seed, spawn_key=(1, cell_idx)))
        idx = rng.integers(0, r_count, size=(config.bootstrap_resamples, r_count))

        err_arr = {est: np.vstack([r.errors[est] for r in valid]) for est in config.estimators}
        cov_arr = {est: np.vstack([r.covered[est] for r in valid]) for est in config.estimators}

        mse_boots: dict[str, np.ndarray] = {}
        for est in config.estimators:
            stats = []
            errs = err_arr[est]
            boot_mse_cols = []
            for j, name in enumerate(names):
                e = errs[:, j]
                eb = e[idx]
                bias_boot = eb.mean(axis=1)
                mse_boot = (eb**2).mean(axis=1)
                boot_mse_cols.append(mse_boot)
                stats.append(ParamStats(
                    name=name,
                    truth=float(truth[j]),
                    bias=float(e.mean()),
                    bias_ci=_percentile_ci(bias_boot),
                    mse=float((e**2).mean()),
                    mse_ci=_percentile_ci(mse_boot),
                    rmse=float(np.sqrt((e**2).mean())),
                    mae=float(np.abs(e).mean()),
                    coverage95=float(cov_arr[est][:, j].mean()),
                ))
            est_stats[est] = stats
            mse_boots[est] = np.column_stack(boot_mse_cols)

        if "pmm2" in config.estimators:
            re_baseline = "css" if "css" in config.estimators else "ols"
            base_mse = np.array([s.mse for s in est_stats[re_baseline]])
            pmm2_mse = np.array([s.mse for s in est_stats["pmm2"]])
            re_boot = mse_boots[re_baseline] / mse_boots["pmm2"]
            for j, name in enumerate(names):
                re_rows.append(ReRow(
                    name=name,
                    value=float(base_mse[j] / pmm2_mse[j]),
                    ci=_percentile_ci(re_boot[:, j]),
                ))
            fallback_rate = float(np.mean([r.fallback for r in valid]))
            g3_vals = np.array([r.resid_gamma3 for r in valid])
            if np.any(np.isfinite(g3_vals)):
                g3_mean = float(np.nanmean(g3_vals))

    return CellReport(
        model_index=model_index,
        model_label=model.label(),
        model={"p": model.p, "d": model.d, "q": model.q, "phi": list(model.phi),
               "theta": list(model.theta), "intercept": model.intercept},
        n=n,
        innovation_label=law.label(),
        innovation={"kind": law.kind, "params": dict(law.params)},
        replications=config.replications,
        failures=failures,
        failure_reasons=dict(sorted(reasons.items())),
        valid=failures <= 0.01 * config.replications,
        estimators=est_stats,
        re=re_rows,
        re_baseline=re_baseline,
        fallback_rate=fallback_rate,
        residual_gamma3_mean=g3_mean,
    )


def _cells(config: ExperimentConfig):
    idx = 0
    for model_index, model in enumerate(config.models):
        for n in config.sample_sizes:
            for law in config.innovations:
                yield idx, model_index, model, n, law
                idx += 1


def run(config: ExperimentConfig, workers: int | None = None) -> MCReport:
    """Execute the experiment grid; identical configs give identical reports.

    ``workers`` defaults to the POLYARIMA_WORKERS environment variable (1 if
    unset). Replications are distributed over a thread pool in fixed blocks
    and reassembled in order, so the worker count cannot change any number.
    """
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ConfigError("workers", f"must be >= 1, got {workers}")

    tasks = []
    for cell_idx, model_index, model, n, law in _cells(config):
        for start in range(0, config.replications, _BLOCK):
            stop = min(start + _BLOCK, config.replications)
            tasks.append((cell_idx, model_index, model, n, law, start, stop))

    if workers == 1:
        block_results = [
            _run_block(config, model, n, law, cell_idx, start, stop)
            for cell_idx, _, model, n, law, start, stop in tasks
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            block_results = list(pool.map(
                lambda t: _run_block(config, t[2], t[3], t[4], t[0], t[5], t[6]),
                tasks,
            ))

    per_cell: dict[int, list[_RepResult]] = {}
    for (cell_idx, *_rest), block in zip(tasks, block_results):
        per_cell.setdefault(cell_idx, []).extend(block)

    cells = [
        _aggregate_cell(config, model, model_index, n, law, cell_idx, per_cell[cell_idx])
        for cell_idx, model_index, model, n, law in _cells(config)
    ]
    return MCReport(schema_version=SCHEMA_VERSION, config=config.to_dict(), cells=cells)


# ---------------------------------------------------------------------------
# derived outputs


def re_curve(report: MCReport) -> list[dict]:
    """Empirical vs theoretical efficiency per cell, for reports spanning >= 2 laws.

    The theoretical value is evaluated at the law's exact cumulants; the
    empirical value averages the per-parameter paired ratios.
    """
    laws = {c.innovation_label for c in report.cells}
    if len(laws) < 2:
        raise PolyarimaError("re_curve needs a report covering at least two innovation laws")
    rows = []
    for c in report.cells:
        if not c.re:
            continue
        law = InnovationSpec(c.innovation["kind"], c.innovation["params"])
        g3, g4 = innov_mod.shape_cumulants(law)
        rows.append({
            "model_index": c.model_index,
            "model": c.model_label,
            "n": c.n,
            "innovation": c.innovation_label,
            "gamma3": g3,
            "gamma4": g4,
            "re_theoretical": re_theoretical(g3, g4),
            "re_empirical": float(np.mean([r.value for r in c.re])),
            "re_lo": float(np.mean([r.ci[0] for r in c.re])),
            "re_hi": float(np.mean([r.ci[1] for r in c.re])),
        })
    return rows


_CSV_COLUMNS = [
    "model_index", "model", "n", "innovation", "estimator", "parameter", "truth",
    "bias", "bias_lo", "bias_hi", "mse", "mse_lo", "mse_hi", "rmse", "mae",
    "coverage95", "re", "re_lo", "re_hi", "failures", "valid",
]


def report_to_csv(report: MCReport) -> str:
    """Flat per-parameter table, one row per cell x estimator x parameter."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for c in report.cells:
        re_map = {r.name: r for r in c.re}
        for est, stats in c.estimators.items():
            for s in stats:
                re_row = re_map.get(s.name) if est == "pmm2" else None
                writer.writerow([
                    fmt(c.model_index), c.model_label, fmt(c.n), c.innovation_label,
                    est, s.name, fmt(s.truth),
                    fmt(s.bias), fmt(s.bias_ci[0]), fmt(s.bias_ci[1]),
                    fmt(s.mse), fmt(s.mse_ci[0]), fmt(s.mse_ci[1]),
                    fmt(s.rmse), fmt(s.mae), fmt(s.coverage95),
                    fmt(re_row.value) if re_row else "",
                    fmt(re_row.ci[0]) if re_row else "",
                    fmt(re_row.ci[1]) if re_row else "",
                    fmt(c.failures), fmt(c.valid),
                ])
    return buf.getvalue()


def report_to_json(report: MCReport) -> str:
    return json.dumps(jsonable(report.to_dict()), indent=2) + "\n"


def re_curve_to_csv(rows: list[dict]) -> str:
    cols = ["model_index", "model", "n", "innovation", "gamma3", "gamma4",
            "re_theoretical", "re_empirical", "re_lo", "re_hi"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([row["model_index"], row["model"], fmt(row["n"]), row["innovation"]]
                        + [fmt(row[c]) for c in cols[4:]])
    return buf.getvalue()
