"""Baseline estimators: least squares for pure AR and conditional sum of squares.

Both return a BaselineFit whose parameter vector is ordered (phi..., theta...,
intercept?), matching the pseudo-regressor design used by the second-order
stage. Estimates are projected into the admissible region before residuals are
reported.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import arima
from .arima import ModelSpec
from .exceptions import LengthError, ParameterError, RankError

# |mean| / sd above which an intercept-free fit demeans the series first.
_DEMEAN_RATIO = 0.25

_GN_MAX_ITER = 50
_GN_GRAD_TOL = 1e-8
_GN_STEP_TOL = 1e-10
_GN_FTOL = 1e-10     # relative objective improvement below which we stop
_GN_MAX_HALVINGS = 20
_FD_STEP = 1e-6


@dataclass
class BaselineFit:
    """Result of a baseline fit on the differenced scale."""

    method: str                 # "ols" or "css"
    p: int
    q: int
    intercept: bool
    theta_hat: np.ndarray       # (phi..., theta..., intercept?)
    se: np.ndarray
    sigma2_hat: float
    residuals: np.ndarray
    objective: float            # residual sum of squares
    iterations: int
    converged: bool
    offset: float = 0.0         # mean subtracted from z before fitting

    @property
    def k(self) -> int:
        return self.p + self.q + (1 if self.intercept else 0)

    def model(self, d: int = 0) -> ModelSpec:
        th = np.asarray(self.theta_hat, dtype=float)
        c = float(th[-1]) if self.intercept else None
        return ModelSpec(
            phi=tuple(th[: self.p]),
            theta=tuple(th[self.p : self.p + self.q]),
            d=d,
            intercept=c,
        )


def _maybe_demean(z: np.ndarray, intercept: bool) -> tuple[np.ndarray, float]:
    if intercept:
        return z, 0.0
    mean = float(z.mean())
    sd = float(z.std())
    # a constant nonzero series has ratio infinity and must demean (to zeros,
    # which the rank check then rejects) rather than regress onto a unit root
    if abs(mean) > _DEMEAN_RATIO * sd:
        warnings.warn(
            f"series mean {mean:.6g} is large relative to its spread; the series "
            "was demeaned before fitting. Pass intercept=True to estimate it.",
            stacklevel=3,
        )
        return z - mean, mean
    return z, 0.0


def _lag_matrix(z: np.ndarray, p: int, start: int) -> np.ndarray:
    # column i-1 holds z lagged i steps, rows t = start .. n-1 (0-based)
    n = z.size
    return np.column_stack([z[start - i : n - i] for i in range(1, p + 1)])


def ols_ar(z, p: int, intercept: bool = False) -> BaselineFit:
    """Least-squares fit of a pure AR(p) via the normal equations.

    The design regresses z_t on its p lags (plus a ones column when
    ``intercept``). Residuals coincide with the conditional recursion.
    """
    z = np.asarray(z, dtype=float).ravel()
    if p < 0:
        raise ParameterError(f"p must be >= 0, got {p}")
    k = p + (1 if intercept else 0)
    if k == 0:
        raise ParameterError("nothing to estimate: p = 0 and no intercept")
    if z.size - p < k + 1:
        raise LengthError(f"series of length {z.size} too short for AR({p})")
    z_adj, offset = _maybe_demean(z, intercept)

    cols = []
    if p > 0:
        cols.append(_lag_matrix(z_adj, p, p))
    if intercept:
        cols.append(np.ones((z_adj.size - p, 1)))
    X = np.hstack(cols)
    y = z_adj[p:]

    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise RankError("lag design is rank deficient (constant or degenerate series)")

    fit = BaselineFit(
        method="ols",
        p=p,
        q=0,
        intercept=intercept,
        theta_hat=coef,
        se=np.full(k, np.nan),
        sigma2_hat=np.nan,
        residuals=np.empty(0),
        objective=np.nan,
        iterations=0,
        converged=True,
        offset=offset,
    )
    model = arima.project_to_admissible(fit.model())
    fit.theta_hat = _model_params(model, intercept)
    fit.residuals = arima.residuals(z_adj, model)
    fit.objective = float(fit.residuals @ fit.residuals)
    n_eff = fit.residuals.size
    fit.sigma2_hat = fit.objective / n_eff
    fit.se = _classical_se(X, fit.objective, n_eff, k)
    return fit


def _model_params(model: ModelSpec, intercept: bool) -> np.ndarray:
    parts = list(model.phi) + list(model.theta)
    if intercept:
        parts.append(model.intercept if model.intercept is not None else 0.0)
    return np.asarray(parts, dtype=float)


def _classical_se(J: np.ndarray, rss: float, n_eff: int, k: int) -> np.ndarray:
    sigma2 = rss / max(n_eff - k, 1)
    jtj = J.T @ J
    try:
        cov = sigma2 * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = sigma2 * np.linalg.pinv(jtj)
    d = np.clip(np.diag(cov), 0.0, None)
    return np.sqrt(d)


def _unpack(params: np.ndarray, p: int, q: int, intercept: bool) -> ModelSpec:
    c = float(params[p + q]) if intercept else None
    return ModelSpec(phi=tuple(params[:p]), theta=tuple(params[p : p + q]), d=0, intercept=c)


def css_estimate(
    z,
    p: int,
    q: int,
    intercept: bool = False,
    init=None,
    max_iter: int = _GN_MAX_ITER,
) -> BaselineFit:
    """Minimize the conditional sum of squared residuals by damped Gauss-Newton.

    The residual Jacobian is forward finite differences with step
    ``1e-6 * (1 + |param|)``. Steps are halved (at most 20 times) until the
    objective decreases; candidates are projected into the admissible region
    before evaluation, so accepted objectives are non-increasing. Starts at the
    least-squares AR solution with zero MA coefficients unless ``init`` is
    given.
    """
    z = np.asarray(z, dtype=float).ravel()
    if p < 0 or q < 0:
        raise ParameterError(f"orders must be >= 0, got p={p} q={q}")
    k = p + q + (1 if intercept else 0)
    if k == 0:
        raise ParameterError("nothing to estimate: p = q = 0 and no intercept")
    m = max(p, q)
    if z.size - m < max(k + 1, 8):
        raise LengthError(f"series of length {z.size} too short for ARMA({p},{q})")
    z_adj, offset = _maybe_demean(z, intercept)

    if init is not None:
        params = np.asarray(init, dtype=float).copy()
        if params.size != k:
            raise ParameterError(f"init must have length {k}, got {params.size}")
    else:
        params = np.zeros(k)
        if p > 0:
            # demean locally so the init regression never warns on drifted data
            params[:p] = ols_ar(z_adj - z_adj.mean(), p, intercept=False).theta_hat
        if intercept:
            c0 = float(z_adj.mean()) * (1.0 - float(np.sum(params[:p])))
            params[-1] = c0
    params = _project_params(params, p, q, intercept)

    def resid(vec: np.ndarray) -> np.ndarray:
        return arima.residuals(z_adj, _unpack(vec, p, q, intercept))

    r = resid(params)
    rss = float(r @ r)
    converged = False
    iterations = 0
    J = None
    for iterations in range(1, max_iter + 1):
        J = np.empty((r.size, k))
        for j in range(k):
            step = _FD_STEP * (1.0 + abs(params[j]))
            bumped = params.copy()
            bumped[j] += step
            J[:, j] = (resid(bumped) - r) / step
        grad = 2.0 * (J.T @ r)
        if np.max(np.abs(grad)) < _GN_GRAD_TOL:
            converged = True
            break
        jtj = J.T @ J
        try:
            step_vec = np.linalg.solve(jtj, J.T @ r)
        except np.linalg.LinAlgError:
            step_vec = np.linalg.lstsq(jtj, J.T @ r, rcond=None)[0]

        alpha = 1.0
        accepted = False
        best = None     # (candidate, residuals, rss)
        for halvings in range(_GN_MAX_HALVINGS + 1):
            candidate = _project_params(params - alpha * step_vec, p, q, intercept)
            r_new = resid(candidate)
            rss_new = float(r_new @ r_new)
            if rss_new < (best[2] if best is not None else rss):
                best = (candidate, r_new, rss_new)
            # the full step overshoots near curved optima and can lock into a
            # period-2 cycle; always compare it against the half step
            if best is not None and halvings >= 1:
                break
            alpha *= 0.5
        if best is not None:
            candidate, r_new, rss_new = best
            delta = np.max(np.abs(candidate - params))
            improvement = rss - rss_new
            params, r, rss = candidate, r_new, rss_new
            accepted = True
            # finite-difference noise keeps the gradient test from firing
            # at machine scale, so tiny steps or tiny relative progress
            # also count as convergence
            if delta < _GN_STEP_TOL or improvement <= _GN_FTOL * (1.0 + rss):
                converged = True
        if not accepted:
            # no descent along the Gauss-Newton direction: treat as converged
            # if the gradient is already small, otherwise give up honestly
            converged = bool(np.max(np.abs(grad)) < 1e-4 * (1.0 + rss))
            break
        if converged:
            break

    if J is None:
        J = np.empty((r.size, k))
        for j in range(k):
            step = _FD_STEP * (1.0 + abs(params[j]))
            bumped = params.copy()
            bumped[j] += step
            J[:, j] = (resid(bumped) - r) / step

    n_eff = r.size
    return BaselineFit(
        method="css",
        p=p,
        q=q,
        intercept=intercept,
        theta_hat=params,
        se=_classical_se(J, rss, n_eff, k),
        sigma2_hat=rss / n_eff,
        residuals=r,
        objective=rss,
        iterations=iterations,
        converged=converged,
        offset=offset,
    )


def _project_params(params: np.ndarray, p: int, q: int, intercept: bool) -> np.ndarray:
    model = arima.project_to_admissible(_unpack(params, p, q, intercept))
    return _model_params(model, intercept)
