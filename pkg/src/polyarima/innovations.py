"""Standardized innovation laws: sampling and exact cumulants.

Each law is reduced to zero mean and unit variance by the affine map
``(x - mean) / sd`` built from the raw law's exact moments, so the skewness
``gamma3`` and excess kurtosis ``gamma4`` are the only shape quantities that
survive. Supported kinds: gaussian, gamma, lognormal, chisquare.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .exceptions import ParameterError
from .moments import MomentSet

KINDS = ("gaussian", "gamma", "lognormal", "chisquare")

_DEFAULTS = {
    "gaussian": {},
    "gamma": {"shape": 2.0, "scale": 1.0},
    "lognormal": {"meanlog": 0.0, "sdlog": 0.4},
    "chisquare": {"df": 3.0},
}


@dataclass(frozen=True)
class InnovationSpec:
    """A standardized innovation law.

    ``params`` may omit entries; defaults are gamma(shape=2, scale=1),
    lognormal(meanlog=0, sdlog=0.4) and chisquare(df=3).
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown innovation kind {self.kind!r}; expected one of {KINDS}")
        allowed = set(_DEFAULTS[self.kind])
        extra = set(self.params) - allowed
        if extra:
            raise ParameterError(f"{self.kind} does not accept parameters {sorted(extra)}")
        merged = dict(_DEFAULTS[self.kind])
        merged.update({k: float(v) for k, v in self.params.items()})
        _validate(self.kind, merged)
        object.__setattr__(self, "params", merged)

    def label(self) -> str:
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({inner})"


def _validate(kind: str, p: Mapping[str, float]) -> None:
    if kind == "gamma":
        if p["shape"] <= 0 or p["scale"] <= 0:
            raise ParameterError("gamma requires shape > 0 and scale > 0")
    elif kind == "lognormal":
        if p["sdlog"] <= 0:
            raise ParameterError("lognormal requires sdlog > 0")
    elif kind == "chisquare":
        if p["df"] <= 0:
            raise ParameterError("chisquare requires df > 0")


def raw_mean_sd(spec: InnovationSpec) -> tuple[float, float]:
    """Exact mean and standard deviation of the unstandardized law."""
    p = spec.params
    if spec.kind == "gaussian":
        return 0.0, 1.0
    if spec.kind == "gamma":
        k, s = p["shape"], p["scale"]
        return k * s, math.sqrt(k) * s
    if spec.kind == "lognormal":
        m, s = p["meanlog"], p["sdlog"]
        w = math.exp(s * s)
        return math.exp(m + s * s / 2.0), math.sqrt((w - 1.0) * math.exp(2.0 * m + s * s))
    # chisquare
    v = p["df"]
    return v, math.sqrt(2.0 * v)


def shape_cumulants(spec: InnovationSpec) -> tuple[float, float]:
    """Exact (gamma3, gamma4) of the standardized law, in closed form."""
    p = spec.params
    if spec.kind == "gaussian":
        return 0.0, 0.0
    if spec.kind == "gamma":
        k = p["shape"]
        return 2.0 / math.sqrt(k), 6.0 / k
    if spec.kind == "lognormal":
        w = math.exp(p["sdlog"] ** 2)
        g3 = (w + 2.0) * math.sqrt(w - 1.0)
        g4 = w**4 + 2.0 * w**3 + 3.0 * w**2 - 6.0
        return g3, g4
    v = p["df"]
    return math.sqrt(8.0 / v), 12.0 / v


def theoretical_cumulants(spec: InnovationSpec) -> MomentSet:
    """MomentSet of the standardized law: mu2 = 1, mu3 = gamma3, mu4 = gamma4 + 3."""
    g3, g4 = shape_cumulants(spec)
    return MomentSet.from_central(1.0, g3, g4 + 3.0)


def standardize(values, spec: InnovationSpec) -> np.ndarray:
    """Apply the exact affine standardization of ``spec`` to ``values``."""
    mean, sd = raw_mean_sd(spec)
    return (np.asarray(values, dtype=float) - mean) / sd


def sample(spec: InnovationSpec, n: int, seed) -> np.ndarray:
    """Draw ``n`` standardized innovations.

    ``seed`` may be an int or a numpy SeedSequence; identical inputs produce
    bit-identical output.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    p = spec.params
    if spec.kind == "gaussian":
        return rng.standard_normal(n)
    if spec.kind == "gamma":
        raw = rng.gamma(p["shape"], p["scale"], size=n)
    elif spec.kind == "lognormal":
        raw = rng.lognormal(p["meanlog"], p["sdlog"], size=n)
    else:
        raw = rng.chisquare(p["df"], size=n)
    return standardize(raw, spec)
