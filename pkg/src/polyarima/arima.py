"""ARIMA(p, d, q) mechanics: differencing, simulation, residuals, admissibility.

Conventions. The autoregressive polynomial is ``phi(B) = 1 - phi_1 B - ... -
phi_p B^p`` and the moving-average polynomial uses a plus sign, ``theta(B) =
1 + theta_1 B + ... + theta_q B^q``, so the recursion on the differenced scale
reads ``z_t = c + sum_i phi_i z_{t-i} + e_t + sum_j theta_j e_{t-j}``.
Stationarity and invertibility both mean "all characteristic roots strictly
outside the unit circle". Residual recursions condition on zero presample
residuals.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from .exceptions import AdmissibilityError, LengthError, ParameterError


@dataclass(frozen=True)
class ModelSpec:
    """An ARIMA(p, d, q) parameter point. Orders derive from the vectors."""

    phi: tuple[float, ...] = ()
    theta: tuple[float, ...] = ()
    d: int = 0
    intercept: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if self.d < 0:
            raise ParameterError(f"d must be >= 0, got {self.d}")

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def q(self) -> int:
        return len(self.theta)

    @property
    def k(self) -> int:
        """Number of ARMA coefficients (intercept excluded)."""
        return self.p + self.q

    @classmethod
    def from_orders(cls, p, d, q, phi=(), theta=(), intercept=None) -> "ModelSpec":
        phi = tuple(float(v) for v in phi)
        theta = tuple(float(v) for v in theta)
        if len(phi) != p:
            raise ParameterError(f"expected {p} AR coefficients, got {len(phi)}")
        if len(theta) != q:
            raise ParameterError(f"expected {q} MA coefficients, got {len(theta)}")
        return cls(phi=phi, theta=theta, d=int(d), intercept=intercept)

    def label(self) -> str:
        return f"ARIMA({self.p},{self.d},{self.q})"


def difference(y, d: int) -> np.ndarray:
    """Apply the d-th difference; output length is len(y) - d."""
    y = np.asarray(y, dtype=float).ravel()
    if d < 0:
        raise ParameterError(f"d must be >= 0, got {d}")
    if y.size <= d:
        raise LengthError(f"series of length {y.size} cannot be differenced {d} times")
    return np.diff(y, n=d) if d > 0 else y.copy()


def integrate(z, d: int) -> np.ndarray:
    """Invert ``difference`` by d cumulative sums from zero initial levels."""
    z = np.asarray(z, dtype=float).ravel()
    for _ in range(d):
        z = np.cumsum(z)
    return z


def _poly_coeffs(coeffs, sign: float) -> np.ndarray:
    # ascending characteristic polynomial 1 + sign * (c_1 z + ... + c_k z^k)
    return np.concatenate(([1.0], sign * np.asarray(coeffs, dtype=float)))


def _min_root_modulus(coeffs, sign: float) -> float:
    """Smallest root modulus of the characteristic polynomial, inf if degree 0."""
    c = _poly_coeffs(coeffs, sign)
    # a negligible leading coefficient only adds roots at modulus >= ~1e10,
    # far outside the unit circle, yet it wrecks the scaling of the companion
    # eigenproblem (observed: spurious zero and infinite roots); drop it
    floor = 1e-10 * float(np.max(np.abs(c)))
    while c.size > 1 and abs(c[-1]) <= floor:
        c = c[:-1]
    if c.size == 1:
        return np.inf
    roots = np.polynomial.polynomial.polyroots(c)
    return float(np.min(np.abs(roots)))


def ar_min_root_modulus(model: ModelSpec) -> float:
    return _min_root_modulus(model.phi, -1.0)


def ma_min_root_modulus(model: ModelSpec) -> float:
    return _min_root_modulus(model.theta, +1.0)


def is_admissible(model: ModelSpec) -> bool:
    """True when every AR and MA characteristic root lies strictly outside the unit circle."""
    return ar_min_root_modulus(model) > 1.0 and ma_min_root_modulus(model) > 1.0


def _project_poly(coeffs, sign: float, margin: float) -> tuple[tuple[float, ...], bool]:
    rho = _min_root_modulus(coeffs, sign)
    if rho > 1.0:
        return tuple(float(v) for v in coeffs), False
    # Scale every root by c = (1 + margin) / rho^2: the offending smallest root
    # is reflected outside the circle (new modulus (1 + margin) / rho) and the
    # coefficients transform exactly as c_k -> c_k / c**k.
    c = (1.0 + margin) / (rho * rho)
    scaled = [v / c ** (k + 1) for k, v in enumerate(coeffs)]
    return tuple(scaled), True


def project_to_admissible(model: ModelSpec, margin: float = 1e-3) -> ModelSpec:
    """Rescale inadmissible coefficient vectors into the admissible region.

    Admissible inputs are returned unchanged. Each violating polynomial is
    rescaled through its roots by a single factor, leaving the output strictly
    stationary and invertible with at least ``margin`` of slack.
    """
    if margin <= 0:
        raise ParameterError(f"margin must be positive, got {margin}")
    phi, changed_ar = _project_poly(model.phi, -1.0, margin)
    theta, changed_ma = _project_poly(model.theta, +1.0, margin)
    if not (changed_ar or changed_ma):
        return model
    return replace(model, phi=phi, theta=theta)


def simulate(model: ModelSpec, innovations, burn_in: int = 200) -> np.ndarray:
    """Generate a series from ``model`` driven by the given innovation draws.

    The ARMA recursion runs over all innovations, the first ``burn_in`` values
    are discarded, and the result is integrated ``d`` times (cumulative sums
    from zero initial levels). Output length is ``len(innovations) - burn_in``.
    """
    if burn_in < 0:
        raise ParameterError(f"burn_in must be >= 0, got {burn_in}")
    if not is_admissible(model):
        raise AdmissibilityError(
            f"{model.label()} with phi={model.phi} theta={model.theta} is not "
            "stationary/invertible; project the coefficients first"
        )
    eps = np.asarray(innovations, dtype=float).ravel()
    if eps.size <= burn_in:
        raise LengthError(
            f"need more than burn_in={burn_in} innovations, got {eps.size}"
        )
    w = lfilter(_poly_coeffs(model.theta, +1.0), [1.0], eps)
    if model.intercept is not None:
        w = w + model.intercept
    z = lfilter([1.0], _poly_coeffs(model.phi, -1.0), w)
    return integrate(z[burn_in:], model.d)


def residuals(z, model: ModelSpec) -> np.ndarray:
    """Innovation residuals of the differenced series under ``model``.

    Runs the recursion ``e_t = z_t - sum_i phi_i z_{t-i} - sum_j theta_j
    e_{t-j} - c`` with zero presample residuals, returning values for
    t = max(p, q) + 1 .. n (length n - max(p, q)).
    """
    z = np.asarray(z, dtype=float).ravel()
    m = max(model.p, model.q)
    n = z.size
    if n <= m:
        raise LengthError(f"series of length {n} too short for max(p, q) = {m}")
    u = z[m:].copy()
    for i, coef in enumerate(model.phi, start=1):
        u -= coef * z[m - i : n - i]
    if model.intercept is not None:
        u -= model.intercept
    if model.q == 0:
        return u
    return lfilter([1.0], _poly_coeffs(model.theta, +1.0), u)
