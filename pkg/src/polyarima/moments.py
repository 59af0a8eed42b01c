"""Central moment summaries used by the second-order estimating equations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegeneracyError, LengthError

_MIN_OBS = 8


@dataclass(frozen=True)
class MomentSet:
    """Second through fourth central moments plus derived quantities.

    ``delta = mu2 * (mu4 - mu2**2) - mu3**2`` is the weight denominator of the
    second-order estimating equations; it is strictly positive for any
    nondegenerate distribution. ``gamma3`` and ``gamma4`` are the skewness and
    excess kurtosis implied by the moments.
    """

    mu2: float
    mu3: float
    mu4: float
    delta: float
    gamma3: float
    gamma4: float

    @classmethod
    def from_central(cls, mu2: float, mu3: float, mu4: float) -> "MomentSet":
        if not mu2 > 0.0:
            raise DegeneracyError(f"variance must be positive, got mu2={mu2!r}")
        delta = mu2 * (mu4 - mu2 * mu2) - mu3 * mu3
        if not delta > 0.0:
            raise DegeneracyError(
                f"moment determinant delta={delta!r} is not positive; "
                "the fourth-moment structure is degenerate"
            )
        gamma3 = mu3 / mu2**1.5
        gamma4 = mu4 / mu2**2 - 3.0
        return cls(mu2=mu2, mu3=mu3, mu4=mu4, delta=delta, gamma3=gamma3, gamma4=gamma4)


def sample_moments(residuals) -> MomentSet:
    """Estimate mu2..mu4 from a residual series.

    Moments are central (taken about the sample mean) with divisor ``n``.
    Raises LengthError for fewer than 8 observations and DegeneracyError when
    the variance or the delta determinant degenerates.
    """
    e = np.asarray(residuals, dtype=float).ravel()
    if e.size < _MIN_OBS:
        raise LengthError(f"need at least {_MIN_OBS} residuals, got {e.size}")
    if not np.all(np.isfinite(e)):
        raise DegeneracyError("residuals contain non-finite values")
    c = e - e.mean()
    mu2 = float(np.mean(c**2))
    mu3 = float(np.mean(c**3))
    mu4 = float(np.mean(c**4))
    return MomentSet.from_central(mu2, mu3, mu4)
