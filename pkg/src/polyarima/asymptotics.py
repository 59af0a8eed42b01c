"""Sandwich covariance for the moment-weighted estimator and efficiency ratios."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .pmm2 import Pmm2Design, Pmm2Fit, jacobian, pointwise_score

_RIDGE_SCALE = 1e-10
_COND_LIMIT = 1e12


@dataclass
class CovarianceReport:
    """A = mean score derivative, B = mean outer score product, sigma = A^-1 B A^-T.

    Standard errors are sqrt(sigma_jj / n_eff). ``ridge_used`` flags a
    regularized inversion of a near-singular A.
    """

    A: np.ndarray
    B: np.ndarray
    sigma: np.ndarray
    se: np.ndarray
    n_eff: int
    ridge_used: bool


def sandwich(fit: Pmm2Fit, design: Pmm2Design) -> CovarianceReport:
    """Heteroskedasticity-robust covariance of the estimating equations.

    No correction is applied for the estimated moment weights: they enter the
    limit covariance only through their probability limits, so first-stage
    noise does not change the sandwich.
    """
    if not fit.converged:
        warnings.warn("covariance requested for a non-converged fit", stacklevel=2)
    if fit.moments is None:
        raise DomainError("fit carries no moment estimates; cannot form the sandwich")
    theta = np.asarray(fit.theta_hat, dtype=float)
    n = design.n_eff

    A = jacobian(theta, design, fit.moments) / n
    s = pointwise_score(theta, design, fit.moments)
    psi = design.X * s[:, None]
    B = (psi.T @ psi) / n

    ridge_used = False
    A_use = A
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        tr = np.trace(A)
        bump = _RIDGE_SCALE * abs(tr) if tr != 0.0 else _RIDGE_SCALE
        A_use = A + np.sign(tr if tr != 0.0 else 1.0) * bump * np.eye(A.shape[0])
        ridge_used = True
    A_inv = np.linalg.inv(A_use)

    sigma = A_inv @ B @ A_inv.T
    sigma = 0.5 * (sigma + sigma.T)
    se = np.sqrt(np.clip(np.diag(sigma), 0.0, None) / n)
    return CovarianceReport(A=A, B=B, sigma=sigma, se=se, n_eff=n, ridge_used=ridge_used)


def re_theoretical(gamma3: float, gamma4: float, variant: str = "standard") -> float:
    """Asymptotic variance ratio of least squares to the second-order estimator.

    The default form is (2 + gamma4) / ((2 + gamma4) - gamma3^2), which equals
    1 exactly for symmetric laws and grows with skewness. The "alternate"
    variant uses 4 + 2 * gamma4 in place of 2 + gamma4, halving the influence
    of skewness; it is exposed so reports can state which form produced a
    number.
    """
    if variant == "standard":
        base = 2.0 + gamma4
    elif variant == "alternate":
        base = 4.0 + 2.0 * gamma4
    else:
        raise DomainError(f"unknown variant {variant!r}; expected standard or alternate")
    if base <= 0.0:
        raise DomainError(f"gamma4={gamma4} violates the moment condition 2 + gamma4 > 0")
    den = base - gamma3 * gamma3
    if den <= 0.0:
        raise DomainError(
            f"(gamma3, gamma4) = ({gamma3}, {gamma4}) violates the moment "
            "condition gamma3^2 < 2 + gamma4 required for a positive delta"
        )
    return base / den


def _check_spd(mat: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"{name} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=1e-8, atol=1e-12):
        raise DomainError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise DomainError(f"{name} must be positive definite") from None
    return m


def re_matrix(sigma_baseline, sigma_pmm2) -> dict[str, float]:
    """Determinant- and trace-based efficiency ratios of two covariance matrices."""
    a = _check_spd(sigma_baseline, "sigma_baseline")
    b = _check_spd(sigma_pmm2, "sigma_pmm2")
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch: {a.shape} vs {b.shape}")
    k = a.shape[0]
    sign_a, logdet_a = np.linalg.slogdet(a)
    sign_b, logdet_b = np.linalg.slogdet(b)
    re_det = float(np.exp((logdet_a - logdet_b) / k)) if sign_a > 0 and sign_b > 0 else np.nan
    return {
        "re_det": re_det,
        "re_trace": float(np.trace(a) / np.trace(b)),
    }
