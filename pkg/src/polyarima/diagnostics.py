"""Residual diagnostics, information criteria, method selection, forecasting."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import comb, log, pi

import numpy as np
from scipy.stats import chi2

from . import arima, pmm2
from .arima import ModelSpec
from .asymptotics import re_theoretical
from .exceptions import DegeneracyError, DomainError, LengthError, ParameterError
from .moments import sample_moments


def _acf(x: np.ndarray, lags: int) -> np.ndarray:
    c = x - x.mean()
    denom = float(c @ c)
    if denom == 0.0:
        raise DegeneracyError("constant series has no autocorrelation")
    return np.array([float(c[h:] @ c[:-h]) / denom for h in range(1, lags + 1)])


@dataclass(frozen=True)
class LjungBoxResult:
    stat: float
    p_value: float
    lags: int
    df: int


def ljung_box(residuals, lags: int = 10, fitted_params: int = 0) -> LjungBoxResult:
    """Portmanteau whiteness test: Q = n (n + 2) sum_h rho_h^2 / (n - h)."""
    e = np.asarray(residuals, dtype=float).ravel()
    if lags <= fitted_params:
        raise ParameterError(f"lags ({lags}) must exceed fitted_params ({fitted_params})")
    n = e.size
    if n <= lags + 5:
        raise LengthError(f"series of length {n} too short for {lags} lags")
    rho = _acf(e, lags)
    h = np.arange(1, lags + 1)
    stat = float(n * (n + 2) * np.sum(rho**2 / (n - h)))
    df = lags - fitted_params
    return LjungBoxResult(stat=stat, p_value=float(chi2.sf(stat, df)), lags=lags, df=df)


@dataclass(frozen=True)
class JarqueBeraResult:
    stat: float
    p_value: float
    gamma3: float
    gamma4: float


def jarque_bera(residuals) -> JarqueBeraResult:
    """Moment-based normality test: n (gamma3^2 / 6 + gamma4^2 / 24) ~ chi2(2)."""
    e = np.asarray(residuals, dtype=float).ravel()
    mom = sample_moments(e)
    stat = float(e.size * (mom.gamma3**2 / 6.0 + mom.gamma4**2 / 24.0))
    return JarqueBeraResult(
        stat=stat,
        p_value=float(chi2.sf(stat, 2)),
        gamma3=mom.gamma3,
        gamma4=mom.gamma4,
    )


@dataclass(frozen=True)
class InformationCriteria:
    aic: float
    bic: float
    loglik: float


def information_criteria(rss: float, n_eff: int, n_params: int) -> InformationCriteria:
    """Gaussian plug-in AIC/BIC from a residual sum of squares.

    The likelihood is evaluated post hoc at sigma^2 = rss / n_eff regardless of
    how the parameters were estimated, so values are comparable across
    estimators but are not a likelihood statement for non-Gaussian fits.
    Counts n_params + 1 free parameters (the variance is one).
    """
    if n_eff <= 0:
        raise ParameterError(f"n_eff must be positive, got {n_eff}")
    if not rss > 0.0:
        raise DegeneracyError("residual sum of squares must be positive")
    sigma2 = rss / n_eff
    loglik = -0.5 * n_eff * (log(2.0 * pi) + log(sigma2) + 1.0)
    k1 = n_params + 1
    return InformationCriteria(
        aic=-2.0 * loglik + 2.0 * k1,
        bic=-2.0 * loglik + k1 * log(n_eff),
        loglik=loglik,
    )


class Recommendation(str, Enum):
    USE_BASELINE = "use_baseline"
    USE_PMM2 = "use_pmm2"
    USE_BASELINE_SMALL_SAMPLE = "use_baseline_small_sample"


@dataclass(frozen=True)
class SelectionThresholds:
    gamma3_symmetric: float = 0.5
    gamma4_normal: float = 1.0
    min_sample: int = 200
    min_re: float = 1.2


@dataclass(frozen=True)
class SelectionDecision:
    recommendation: Recommendation
    gamma3_hat: float
    gamma4_hat: float
    re_theoretical: float | None
    rationale: str
    n: int


def _decide(g3: float, g4: float, n: int, th: SelectionThresholds) -> SelectionDecision:
    # pure decision rule; deliberately reproducible from its four inputs
    try:
        re_val = re_theoretical(g3, g4)
    except DomainError:
        re_val = None
    if abs(g3) < th.gamma3_symmetric and abs(g4) < th.gamma4_normal:
        rec, why = Recommendation.USE_BASELINE, "residual cumulants close to gaussian"
    elif n < th.min_sample:
        rec, why = (Recommendation.USE_BASELINE_SMALL_SAMPLE,
                    f"sample of {n} below the stability cutoff {th.min_sample}")
    elif re_val is not None and re_val > th.min_re:
        rec, why = Recommendation.USE_PMM2, f"predicted efficiency gain {re_val:.3f} exceeds {th.min_re}"
    else:
        rec, why = Recommendation.USE_BASELINE, "predicted efficiency gain too small"
    return SelectionDecision(
        recommendation=rec,
        gamma3_hat=g3,
        gamma4_hat=g4,
        re_theoretical=re_val,
        rationale=why,
        n=n,
    )


def select_method(
    y,
    p: int,
    d: int,
    q: int,
    thresholds: SelectionThresholds | None = None,
    intercept: bool = False,
) -> SelectionDecision:
    """Decision rule for estimator choice from baseline residual cumulants.

    Fits the baseline on the differenced series, reads skewness and excess
    kurtosis off its residuals, and recommends the second-order estimator only
    for asymmetric laws, adequate samples, and a predicted gain above the
    threshold.
    """
    th = thresholds or SelectionThresholds()
    z = arima.difference(y, d)
    stage1 = pmm2.first_stage(z, p, q, pmm2.FitConfig(intercept=intercept))
    mom = sample_moments(stage1.residuals)
    return _decide(mom.gamma3, mom.gamma4, z.size, th)


def forecast_one_step(model: ModelSpec, y) -> float:
    """Conditional-mean one-step forecast on the original scale.

    Differences the history, runs the residual recursion under ``model``, and
    inverts the differencing for the next level.
    """
    y = np.asarray(y, dtype=float).ravel()
    z = arima.difference(y, model.d)
    m = max(model.p, model.q)
    if z.size <= m:
        raise LengthError(f"history of length {y.size} too short to forecast")
    eps_full = np.zeros(z.size)
    if m < z.size:
        eps_full[m:] = arima.residuals(z, model)

    z_hat = model.intercept if model.intercept is not None else 0.0
    for i, coef in enumerate(model.phi, start=1):
        z_hat += coef * z[-i]
    for j, coef in enumerate(model.theta, start=1):
        z_hat += coef * eps_full[-j]

    # invert d-fold differencing: y_{T+1} = z_hat + sum_i C(d,i) (-1)^{i+1} y_{T+1-i}
    y_hat = z_hat
    for i in range(1, model.d + 1):
        y_hat += comb(model.d, i) * (-1) ** (i + 1) * y[-i]
    return float(y_hat)


def one_step_errors(model: ModelSpec, y, start: int) -> np.ndarray:
    """Errors y_t - forecast(y_{<t}) for t = start .. len(y) - 1, fixed model."""
    y = np.asarray(y, dtype=float).ravel()
    if not 0 < start < y.size:
        raise ParameterError(f"start must lie inside the series, got {start}")
    errs = np.empty(y.size - start)
    for idx, t in enumerate(range(start, y.size)):
        errs[idx] = y[t] - forecast_one_step(model, y[:t])
    return errs


@dataclass
class MethodValidation:
    rmse: float
    mae: float
    n_forecasts: int
    errors: np.ndarray


@dataclass
class ValidationReport:
    mode: str
    split: float | None
    window: int | None
    refit_every: int
    per_method: dict[str, MethodValidation]
    improvement_pct: float | None


_MIN_TRAIN = 30


def _fit_model(y_train: np.ndarray, p: int, d: int, q: int, method: str,
               intercept: bool) -> ModelSpec:
    if method == "pmm2":
        return pmm2.fit(y_train, p, d, q, pmm2.FitConfig(intercept=intercept)).model(d)
    z = arima.difference(y_train, d)
    cfg = pmm2.FitConfig(baseline="auto" if method == "auto" else method, intercept=intercept)
    return pmm2.first_stage(z, p, q, cfg).model(d)


def rolling_validate(
    y,
    p: int,
    d: int,
    q: int,
    mode: str = "fixed",
    split: float = 0.8,
    window: int | None = None,
    refit_every: int = 1,
    methods: tuple[str, ...] = ("css", "pmm2"),
    intercept: bool = False,
) -> ValidationReport:
    """One-step out-of-sample comparison of estimators on the original scale.

    ``fixed`` fits once on the leading ``split`` fraction and forecasts the
    rest with frozen parameters. ``rolling`` refits on a trailing window of
    ``window`` observations every ``refit_every`` forecasts.
    """
    y = np.asarray(y, dtype=float).ravel()
    t_total = y.size
    if mode not in ("fixed", "rolling"):
        raise ParameterError(f"mode must be fixed or rolling, got {mode!r}")
    if refit_every < 1:
        raise ParameterError(f"refit_every must be >= 1, got {refit_every}")

    if mode == "fixed":
        if not 0.0 < split < 1.0:
            raise ParameterError(f"split must lie in (0, 1), got {split}")
        n_train = int(round(split * t_total))
        if n_train < _MIN_TRAIN or n_train >= t_total:
            raise LengthError(
                f"split {split} leaves an unusable train/test partition of {t_total} points"
            )
        origins = range(n_train, t_total)
    else:
        if window is None:
            raise ParameterError("rolling mode requires a window size")
        if window >= t_total:
            raise ParameterError(f"window {window} must be smaller than the series ({t_total})")
        if window < _MIN_TRAIN:
            raise LengthError(f"window {window} too small to fit on")
        origins = range(window, t_total)

    per_method: dict[str, MethodValidation] = {}
    for method in methods:
        model: ModelSpec | None = None
        errs = np.empty(len(origins))
        for idx, t in enumerate(origins):
            needs_refit = model is None or (mode == "rolling" and idx % refit_every == 0)
            if needs_refit:
                train = y[:t] if mode == "fixed" else y[t - window : t]
                model = _fit_model(train, p, d, q, method, intercept)
            errs[idx] = y[t] - forecast_one_step(model, y[:t])
        per_method[method] = MethodValidation(
            rmse=float(np.sqrt(np.mean(errs**2))),
            mae=float(np.mean(np.abs(errs))),
            n_forecasts=errs.size,
            errors=errs,
        )

    improvement = None
    if "pmm2" in per_method:
        base_keys = [mth for mth in per_method if mth != "pmm2"]
        if base_keys:
            base = per_method[base_keys[0]].rmse
            if base > 0:
                improvement = 100.0 * (base - per_method["pmm2"].rmse) / base
    return ValidationReport(
        mode=mode,
        split=split if mode == "fixed" else None,
        window=window if mode == "rolling" else None,
        refit_every=refit_every,
        per_method=per_method,
        improvement_pct=improvement,
    )
