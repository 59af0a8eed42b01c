"""FastAPI application wrapping the estimation core.

Library errors become HTTP 400 with a ``{"category", "message"}`` detail;
request-shape problems are FastAPI's usual 422. All numeric work happens in
the core package; handlers only translate payloads.
"""
from __future__ import annotations

import math
import time
import warnings

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, arima, diagnostics, innovations, montecarlo, pmm2
from ..asymptotics import sandwich
from ..baseline import BaselineFit
from ..exceptions import ParameterError, PolyarimaError
from ..numfmt import jsonable
from . import schemas

SCHEMA_VERSION = 1


def create_app() -> FastAPI:
    app = FastAPI(title="polyarima", version=__version__)

    @app.exception_handler(PolyarimaError)
    async def _lib_error(_request: Request, exc: PolyarimaError):
        return JSONResponse(
            status_code=400,
            content={"detail": {"category": exc.category, "message": str(exc)}},
        )

    @app.get("/health", response_model=schemas.Health)
    def health():
        return schemas.Health(status="ok", version=__version__)

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        model = arima.ModelSpec.from_orders(
            req.order.p, req.order.d, req.order.q, req.phi, req.theta, req.intercept
        )
        law = innovations.InnovationSpec(req.innovation.kind, req.innovation.params)
        eps = innovations.sample(law, req.n + req.burn_in, req.seed)
        y = arima.simulate(model, eps, req.burn_in)
        return schemas.SimulateResponse(
            schema_version=SCHEMA_VERSION, n=req.n, seed=req.seed, values=y.tolist()
        )

    @app.post("/fit", response_model=schemas.FitResponse)
    def fit(req: schemas.FitRequest):
        y = np.asarray(req.values, dtype=float)
        p, d, q = req.order.p, req.order.d, req.order.q
        if req.method == "ols" and q != 0:
            raise ParameterError("the ols method requires q = 0")

        blocks: dict[str, schemas.FitBlock] = {}
        if req.method in ("ols", "css"):
            blocks[req.method] = _baseline_block(y, p, d, q, req, req.method)
        elif req.method == "both":
            base_method = "ols" if q == 0 else "css"
            blocks[base_method] = _baseline_block(y, p, d, q, req, base_method)
            blocks["pmm2"] = _pmm2_block(y, p, d, q, req)
        else:
            blocks["pmm2"] = _pmm2_block(y, p, d, q, req)

        return schemas.FitResponse(
            schema_version=SCHEMA_VERSION,
            n=y.size,
            d=d,
            n_eff=y.size - d - max(p, q),
            method=req.method,
            blocks=blocks,
        )

    @app.post("/select", response_model=schemas.SelectResponse)
    def select(req: schemas.SelectRequest):
        th = diagnostics.SelectionThresholds(
            gamma3_symmetric=req.thresholds.gamma3_symmetric,
            gamma4_normal=req.thresholds.gamma4_normal,
            min_sample=req.thresholds.min_sample,
            min_re=req.thresholds.min_re,
        )
        decision = diagnostics.select_method(
            np.asarray(req.values, dtype=float),
            req.order.p, req.order.d, req.order.q,
            thresholds=th, intercept=req.intercept,
        )
        return schemas.SelectResponse(
            schema_version=SCHEMA_VERSION,
            recommendation=decision.recommendation.value,
            gamma3_hat=decision.gamma3_hat,
            gamma4_hat=decision.gamma4_hat,
            re_theoretical=decision.re_theoretical,
            rationale=decision.rationale,
            n=decision.n,
        )

    @app.post("/validate", response_model=schemas.ValidateResponse)
    def validate(req: schemas.ValidateRequest):
        report = diagnostics.rolling_validate(
            np.asarray(req.values, dtype=float),
            req.order.p, req.order.d, req.order.q,
            mode=req.mode, split=req.split, window=req.window,
            refit_every=req.refit_every, methods=tuple(req.methods),
            intercept=req.intercept,
        )
        return schemas.ValidateResponse(
            schema_version=SCHEMA_VERSION,
            mode=report.mode,
            split=report.split,
            window=report.window,
            refit_every=report.refit_every,
            methods={
                name: schemas.MethodValidationOut(
                    rmse=mv.rmse, mae=mv.mae, n_forecasts=mv.n_forecasts,
                    errors=mv.errors.tolist(),
                )
                for name, mv in report.per_method.items()
            },
            improvement_pct=report.improvement_pct,
        )

    @app.post("/mc", response_model=schemas.McResponse)
    def mc(req: schemas.McRequest):
        config = montecarlo.config_from_dict(req.config)
        report = montecarlo.run(config, workers=req.workers)
        payload = {
            "report": jsonable(report.to_dict()),
            "csv": montecarlo.report_to_csv(report),
        }
        if len({c.innovation_label for c in report.cells}) >= 2:
            rows = montecarlo.re_curve(report)
            payload["re_curve"] = jsonable(rows)
            payload["re_curve_csv"] = montecarlo.re_curve_to_csv(rows)
        return schemas.McResponse(report=payload)

    return app


def _collect_notes(caught) -> list[str]:
    return [str(w.message) for w in caught]


def _finite(x: float) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def _finite_list(values) -> list[float | None]:
    return [_finite(v) for v in np.asarray(values, dtype=float)]


def _diag_block(residuals: np.ndarray, p: int, q: int, lb_lags: int,
                notes: list[str]) -> schemas.DiagnosticsOut:
    lb = jb = None
    try:
        r = diagnostics.ljung_box(residuals, lags=lb_lags, fitted_params=p + q)
        lb = schemas.LjungBoxOut(stat=r.stat, p_value=r.p_value, lags=r.lags, df=r.df)
    except PolyarimaError as exc:
        notes.append(f"ljung_box unavailable: {exc}")
    try:
        r = diagnostics.jarque_bera(residuals)
        jb = schemas.JarqueBeraOut(stat=r.stat, p_value=r.p_value)
    except PolyarimaError as exc:
        notes.append(f"jarque_bera unavailable: {exc}")
    return schemas.DiagnosticsOut(ljung_box=lb, jarque_bera=jb)


def _ic_block(rss: float, n_eff: int, k: int, caveat: bool,
              notes: list[str]) -> schemas.IcOut | None:
    try:
        ic = diagnostics.information_criteria(rss, n_eff, k)
    except PolyarimaError as exc:
        notes.append(f"information criteria unavailable: {exc}")
        return None
    return schemas.IcOut(aic=ic.aic, bic=ic.bic, loglik=ic.loglik,
                         posthoc_gaussian_caveat=caveat)


def _baseline_block(y: np.ndarray, p: int, d: int, q: int,
                    req: schemas.FitRequest, method: str) -> schemas.FitBlock:
    notes: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        start = time.perf_counter()
        z = arima.difference(y, d)
        cfg = pmm2.FitConfig(baseline=method, intercept=req.intercept)
        bfit: BaselineFit = pmm2.first_stage(z, p, q, cfg)
        elapsed = time.perf_counter() - start
    notes.extend(_collect_notes(caught))
    return schemas.FitBlock(
        method=method,
        names=_names(p, q, req.intercept),
        estimates=np.asarray(bfit.theta_hat, dtype=float).tolist(),
        se=_finite_list(bfit.se),
        sigma2=_finite(bfit.sigma2_hat),
        converged=bfit.converged,
        iterations=bfit.iterations,
        diagnostics=_diag_block(bfit.residuals, p, q, req.lb_lags, notes),
        ic=_ic_block(bfit.objective, bfit.residuals.size, bfit.k, False, notes),
        timing_seconds=elapsed,
        notes=notes,
    )


def _pmm2_block(y: np.ndarray, p: int, d: int, q: int,
                req: schemas.FitRequest) -> schemas.FitBlock:
    notes: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        start = time.perf_counter()
        cfg = pmm2.FitConfig(intercept=req.intercept, adaptive=req.adaptive)
        pfit = pmm2.fit(y, p, d, q, cfg)
        elapsed = time.perf_counter() - start
    notes.extend(_collect_notes(caught))

    if pfit.fallback_used:
        notes.append("second-order stage fell back to the baseline estimate")
        se = (_finite_list(pfit.fallback_se) if pfit.fallback_se is not None
              else [None] * pfit.k)
    else:
        cov = sandwich(pfit, pfit.design)
        se = _finite_list(cov.se)
        if cov.ridge_used:
            notes.append("covariance used a ridge-regularized inversion")

    mom = None
    if pfit.moments is not None:
        m = pfit.moments
        mom = schemas.MomentsOut(mu2=m.mu2, mu3=m.mu3, mu4=m.mu4, delta=m.delta,
                                 gamma3=m.gamma3, gamma4=m.gamma4)
    resid = pfit.residuals if pfit.residuals is not None else np.empty(0)
    rss = float(resid @ resid)
    return schemas.FitBlock(
        method="pmm2",
        names=_names(p, q, req.intercept),
        estimates=np.asarray(pfit.theta_hat, dtype=float).tolist(),
        se=se,
        sigma2=_finite(rss / resid.size) if resid.size else None,
        converged=pfit.converged,
        iterations=pfit.iterations,
        fallback_used=pfit.fallback_used,
        score_norm=_finite(pfit.score_norm),
        moments=mom,
        diagnostics=_diag_block(resid, p, q, req.lb_lags, notes),
        ic=_ic_block(rss, resid.size, pfit.k, True, notes),
        timing_seconds=elapsed,
        notes=notes,
    )


def _names(p: int, q: int, intercept: bool) -> list[str]:
    names = [f"phi{i}" for i in range(1, p + 1)] + [f"theta{j}" for j in range(1, q + 1)]
    if intercept:
        names.append("intercept")
    return names


app = create_app()
