"""Second-order polynomial moment estimation for ARIMA coefficients.

The estimator solves the system g(theta) = 0 where, with eta_t = x_t' theta,
M = mu4 - mu2^2 and delta = mu2 * M - mu3^2,

    g_j(theta) = sum_t x_{j,t} * [ (M + 2 mu3 eta_t) (z_t - eta_t)
                                   - mu3 (z_t^2 - eta_t^2 - mu2) ] / delta.

The weights use the second through fourth central moments of first-stage
baseline residuals, so asymmetry in the innovation law (mu3 != 0) tightens the
estimates; with mu3 = 0 the system collapses to the least-squares normal
equations on the same design. The derivative is available in closed form:
d g / d theta = sum_t lambda_t x_t x_t' with
lambda_t = (2 mu3 (z_t - eta_t) - M) / delta, which drives a damped Newton
iteration.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import arima
from .arima import ModelSpec
from .baseline import BaselineFit, css_estimate, ols_ar
from .exceptions import DegeneracyError, LengthError, ParameterError
from .moments import MomentSet, sample_moments

# re-exported: sample_moments and MomentSet belong to this module's surface
__all__ = [
    "MomentSet",
    "sample_moments",
    "Pmm2Design",
    "Pmm2Fit",
    "SolverConfig",
    "FitConfig",
    "build_design",
    "score",
    "pointwise_score",
    "jacobian",
    "quadratic_score",
    "newton_solve",
    "second_stage",
    "fit",
]


@dataclass(frozen=True)
class Pmm2Design:
    """Fixed pseudo-regressor design for the second-order stage.

    Row t is (z_{t-1}, ..., z_{t-p}, e_{t-1}, ..., e_{t-q}) for
    t = max(p, q) + 1 .. n, where e are first-stage residuals with zero
    presample values; a ones column is appended last when an intercept is
    estimated. The design is held fixed while theta is iterated.
    """

    X: np.ndarray
    z: np.ndarray               # response, z_t over the same rows
    p: int
    q: int
    intercept: bool
    names: tuple[str, ...]

    @property
    def n_eff(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


@dataclass
class Pmm2Fit:
    """Solution of the second-order estimating equations."""

    theta_hat: np.ndarray
    moments: MomentSet | None
    score_norm: float
    iterations: int
    converged: bool
    fallback_used: bool
    p: int
    q: int
    intercept: bool
    residuals: np.ndarray | None = None
    used_pseudoinverse: bool = False
    offset: float = 0.0
    method: str = "pmm2"
    design: Pmm2Design | None = None
    fallback_se: np.ndarray | None = None  # baseline standard errors when fallback_used

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


@dataclass(frozen=True)
class SolverConfig:
    score_tol: float = 1e-6
    step_tol: float = 1e-8
    max_iter: int = 50
    max_halvings: int = 20
    project: bool = True
    margin: float = 1e-3


@dataclass(frozen=True)
class FitConfig:
    """Options for the full two-stage fit.

    ``baseline`` is "auto" (least squares when q = 0, conditional sum of
    squares otherwise), "ols", or "css". ``fallback_gamma3`` is the residual
    skewness magnitude below which the baseline estimate is retained
    unchanged. ``adaptive`` re-estimates the moment weights from the
    second-stage residuals until they stabilize.
    """

    baseline: str = "auto"
    intercept: bool = False
    adaptive: bool = False
    adaptive_max_iter: int = 5
    adaptive_tol: float = 1e-6
    fallback_gamma3: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)


def build_design(z, baseline: BaselineFit, p: int, q: int, intercept: bool = False) -> Pmm2Design:
    """Assemble the pseudo-regressor matrix from data and first-stage residuals."""
    z = np.asarray(z, dtype=float).ravel()
    m = max(p, q)
    n = z.size
    if n - m < max(p + q + 1, 2):
        raise LengthError(f"series of length {n} too short for a ({p},{q}) design")
    if baseline.residuals.size != n - max(baseline.p, baseline.q):
        raise ParameterError("baseline residuals are not aligned with the series")
    z_adj = z - baseline.offset

    eps_full = np.zeros(n)
    eps_full[n - baseline.residuals.size :] = baseline.residuals

    cols = []
    names: list[str] = []
    for i in range(1, p + 1):
        cols.append(z_adj[m - i : n - i])
        names.append(f"phi{i}")
    for j in range(1, q + 1):
        cols.append(eps_full[m - j : n - j])
        names.append(f"theta{j}")
    if intercept:
        cols.append(np.ones(n - m))
        names.append("intercept")
    if not cols:
        raise ParameterError("empty design: p = q = 0 and no intercept")
    return Pmm2Design(
        X=np.column_stack(cols),
        z=z_adj[m:],
        p=p,
        q=q,
        intercept=intercept,
        names=tuple(names),
    )


def _bracket(theta: np.ndarray, design: Pmm2Design, mom: MomentSet) -> np.ndarray:
    eta = design.X @ theta
    resid = design.z - eta
    big_m = mom.mu4 - mom.mu2**2
    return ((big_m + 2.0 * mom.mu3 * eta) * resid
            - mom.mu3 * (design.z**2 - eta**2 - mom.mu2)) / mom.delta


def pointwise_score(theta, design: Pmm2Design, moments: MomentSet) -> np.ndarray:
    """Per-observation score factor s_t; the full influence term is x_t * s_t."""
    return _bracket(np.asarray(theta, dtype=float), design, moments)


def score(theta, design: Pmm2Design, moments: MomentSet) -> np.ndarray:
    """Estimating-equation value g(theta), one entry per design column."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != design.k:
        raise ParameterError(f"theta must have length {design.k}, got {theta.size}")
    return design.X.T @ _bracket(theta, design, moments)


def jacobian(theta, design: Pmm2Design, moments: MomentSet) -> np.ndarray:
    """Closed-form derivative of the score: sum_t lambda_t x_t x_t'."""
    theta = np.asarray(theta, dtype=float)
    eta = design.X @ theta
    big_m = moments.mu4 - moments.mu2**2
    lam = (2.0 * moments.mu3 * (design.z - eta) - big_m) / moments.delta
    return design.X.T @ (lam[:, None] * design.X)


def quadratic_score(theta, design: Pmm2Design, moments: MomentSet) -> np.ndarray:
    """Grouped quadratic form of the system, sum_t x_t (A2 eta^2 + B2_t eta + C2_t).

    With A2 = mu3, B2_t = (mu4 - mu2^2) - 2 mu3 z_t and
    C2_t = mu3 z_t^2 - z_t (mu4 - mu2^2) - mu2 mu3 this equals
    ``-delta * score(theta)`` identically, so both forms share their roots.
    """
    theta = np.asarray(theta, dtype=float)
    eta = design.X @ theta
    big_m = moments.mu4 - moments.mu2**2
    a2 = moments.mu3
    b2 = big_m - 2.0 * moments.mu3 * design.z
    c2 = moments.mu3 * design.z**2 - design.z * big_m - moments.mu2 * moments.mu3
    return design.X.T @ (a2 * eta**2 + b2 * eta + c2)


def _project_theta(theta: np.ndarray, design: Pmm2Design, margin: float) -> np.ndarray:
    p, q = design.p, design.q
    c = float(theta[p + q]) if design.intercept else None
    model = ModelSpec(phi=tuple(theta[:p]), theta=tuple(theta[p : p + q]), d=0, intercept=c)
    projected = arima.project_to_admissible(model, margin)
    if projected is model:
        return theta
    out = list(projected.phi) + list(projected.theta)
    if design.intercept:
        out.append(c)
    return np.asarray(out, dtype=float)


def newton_solve(init, design: Pmm2Design, moments: MomentSet, cfg: SolverConfig | None = None) -> Pmm2Fit:
    """Damped Newton iteration on the estimating equations.

    Halves the step while the max-norm of the score increases; singular
    derivative matrices fall back to a pseudo-inverse step and are flagged.
    Iterates are projected into the admissible region. Returns the best
    iterate with ``converged=False`` if the caps are exhausted.
    """
    cfg = cfg or SolverConfig()
    theta = np.asarray(init, dtype=float).copy()
    if theta.size != design.k:
        raise ParameterError(f"init must have length {design.k}, got {theta.size}")
    if cfg.project:
        theta = _project_theta(theta, design, cfg.margin)

    used_pinv = False
    g = score(theta, design, moments)
    gnorm = float(np.max(np.abs(g)))
    best_theta, best_gnorm = theta.copy(), gnorm
    converged = False
    iterations = 0

    while True:
        if gnorm < cfg.score_tol:
            converged = True
            break
        if iterations >= cfg.max_iter:
            break
        iterations += 1
        jac = jacobian(theta, design, moments)
        try:
            step = np.linalg.solve(jac, g)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = np.linalg.pinv(jac) @ g
            used_pinv = True

        alpha = 1.0
        moved = False
        last_step = np.inf
        for _ in range(cfg.max_halvings + 1):
            candidate = theta - alpha * step
            if cfg.project:
                candidate = _project_theta(candidate, design, cfg.margin)
            g_new = score(candidate, design, moments)
            gnorm_new = float(np.max(np.abs(g_new)))
            if gnorm_new < gnorm:
                last_step = float(np.max(np.abs(candidate - theta)))
                theta, g, gnorm = candidate, g_new, gnorm_new
                moved = True
                break
            alpha *= 0.5
        if not moved:
            break
        if gnorm < best_gnorm:
            best_theta, best_gnorm = theta.copy(), gnorm
        if last_step < cfg.step_tol:
            # parameter movement stalled; accept only if the score is at tolerance
            converged = gnorm < cfg.score_tol
            break

    return Pmm2Fit(
        theta_hat=best_theta,
        moments=moments,
        score_norm=best_gnorm,
        iterations=iterations,
        converged=converged,
        fallback_used=False,
        p=design.p,
        q=design.q,
        intercept=design.intercept,
        used_pseudoinverse=used_pinv,
    )


# delta below this multiple of mu2^2 is treated as numerically degenerate
_DELTA_FLOOR = 1e-12


def _fallback(baseline: BaselineFit, moments: MomentSet | None, reason: str,
              warn: bool = False) -> Pmm2Fit:
    if warn:
        warnings.warn(f"second-order stage skipped: {reason}; baseline estimate retained",
                      stacklevel=3)
    return Pmm2Fit(
        theta_hat=np.asarray(baseline.theta_hat, dtype=float).copy(),
        moments=moments,
        score_norm=np.nan,
        iterations=0,
        converged=True,
        fallback_used=True,
        p=baseline.p,
        q=baseline.q,
        intercept=baseline.intercept,
        residuals=baseline.residuals.copy(),
        offset=baseline.offset,
        fallback_se=np.asarray(baseline.se, dtype=float).copy(),
    )


def second_stage(z, baseline: BaselineFit, cfg: FitConfig | None = None) -> Pmm2Fit:
    """Run the moment-weighted correction on top of an existing baseline fit.

    Implements the estimation loop: residual moments, the symmetric-residual
    fallback gate, the fixed design, the Newton solve from the baseline
    estimate, and residual reconstruction. ``fit`` composes this with
    differencing and the first stage; Monte Carlo cells call it directly so
    the two estimators share one baseline.
    """
    cfg = cfg or FitConfig()
    z = np.asarray(z, dtype=float).ravel()
    p, q, intercept = baseline.p, baseline.q, baseline.intercept

    try:
        mom = sample_moments(baseline.residuals)
    except DegeneracyError as exc:
        return _fallback(baseline, None, f"degenerate residual moments ({exc})", warn=True)

    if abs(mom.gamma3) < cfg.fallback_gamma3:
        # symmetric residuals: the second-order weights carry no information,
        # so the baseline estimate is the answer (flagged, not warned)
        return _fallback(baseline, mom,
                         f"residual skewness {mom.gamma3:.4f} below {cfg.fallback_gamma3}")
    if mom.delta <= _DELTA_FLOOR * mom.mu2**2:
        return _fallback(baseline, mom, f"delta {mom.delta:.3e} numerically degenerate",
                         warn=True)

    design = build_design(z, baseline, p, q, intercept)
    result = newton_solve(np.asarray(baseline.theta_hat, dtype=float), design, mom, cfg.solver)

    if cfg.adaptive:
        for _ in range(cfg.adaptive_max_iter):
            model = result.model()
            resid = arima.residuals(z - baseline.offset, model)
            try:
                mom_new = sample_moments(resid)
            except DegeneracyError:
                break
            if abs(mom_new.gamma3) < cfg.fallback_gamma3:
                break
            change = max(
                abs(mom_new.mu2 - mom.mu2) / (1.0 + abs(mom.mu2)),
                abs(mom_new.mu3 - mom.mu3) / (1.0 + abs(mom.mu3)),
                abs(mom_new.mu4 - mom.mu4) / (1.0 + abs(mom.mu4)),
            )
            mom = mom_new
            result = newton_solve(result.theta_hat, design, mom, cfg.solver)
            if change < cfg.adaptive_tol:
                break

    final_model = arima.project_to_admissible(result.model(), cfg.solver.margin)
    theta_final = list(final_model.phi) + list(final_model.theta)
    if intercept:
        theta_final.append(result.theta_hat[p + q])
    theta_final = np.asarray(theta_final, dtype=float)

    result.theta_hat = theta_final
    result.residuals = arima.residuals(z - baseline.offset, final_model)
    result.score_norm = float(np.max(np.abs(score(theta_final, design, result.moments))))
    result.offset = baseline.offset
    result.design = design
    return result


def fit(y, p: int, d: int, q: int, cfg: FitConfig | None = None) -> Pmm2Fit:
    """Two-stage fit of an ARIMA(p, d, q) on a raw series.

    Differences ``y`` d times, runs the configured baseline, then the
    second-order correction. With nearly symmetric baseline residuals the
    baseline estimate is returned unchanged (``fallback_used=True``).
    """
    cfg = cfg or FitConfig()
    z = arima.difference(y, d)
    stage1 = first_stage(z, p, q, cfg)
    return second_stage(z, stage1, cfg)


def first_stage(z, p: int, q: int, cfg: FitConfig | None = None) -> BaselineFit:
    """Baseline fit used to seed the second stage, per ``cfg.baseline``."""
    cfg = cfg or FitConfig()
    choice = cfg.baseline
    if choice == "auto":
        choice = "ols" if q == 0 else "css"
    if choice == "ols":
        if q != 0:
            raise ParameterError("the least-squares baseline requires q = 0")
        return ols_ar(z, p, intercept=cfg.intercept)
    if choice == "css":
        return css_estimate(z, p, q, intercept=cfg.intercept)
    raise ParameterError(f"unknown baseline {cfg.baseline!r}; expected auto, ols, or css")
