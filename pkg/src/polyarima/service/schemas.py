"""Request and response models for the service endpoints."""
from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field, model_validator

Method = Literal["ols", "css", "pmm2", "both"]


class Order(BaseModel):
    p: int = Field(ge=0)
    d: int = Field(ge=0)
    q: int = Field(ge=0)


class Innovation(BaseModel):
    kind: Literal["gaussian", "gamma", "lognormal", "chisquare"] = "gaussian"
    params: dict[str, float] = Field(default_factory=dict)


class SimulateRequest(BaseModel):
    order: Order
    phi: list[float] = Field(default_factory=list)
    theta: list[float] = Field(default_factory=list)
    intercept: float | None = None
    innovation: Innovation = Field(default_factory=Innovation)
    n: int = Field(ge=1)
    seed: int = Field(ge=0)
    burn_in: int = Field(default=200, ge=0)

    @model_validator(mode="after")
    def _counts(self):
        if len(self.phi) != self.order.p:
            raise ValueError(f"expected {self.order.p} phi coefficients, got {len(self.phi)}")
        if len(self.theta) != self.order.q:
            raise ValueError(f"expected {self.order.q} theta coefficients, got {len(self.theta)}")
        return self


class SimulateResponse(BaseModel):
    schema_version: int
    n: int
    seed: int
    values: list[float]


class FitRequest(BaseModel):
    values: list[float] = Field(min_length=8)
    order: Order
    method: Method = "both"
    intercept: bool = False
    adaptive: bool = False
    lb_lags: int = Field(default=10, ge=1)


class MomentsOut(BaseModel):
    mu2: float
    mu3: float
    mu4: float
    delta: float
    gamma3: float
    gamma4: float


class LjungBoxOut(BaseModel):
    stat: float
    p_value: float
    lags: int
    df: int


class JarqueBeraOut(BaseModel):
    stat: float
    p_value: float


class IcOut(BaseModel):
    aic: float
    bic: float
    loglik: float
    posthoc_gaussian_caveat: bool


class DiagnosticsOut(BaseModel):
    ljung_box: LjungBoxOut | None = None
    jarque_bera: JarqueBeraOut | None = None


class FitBlock(BaseModel):
    method: str
    names: list[str]
    estimates: list[float]
    # None marks a value that is not finite; JSON cannot carry NaN.
    se: list[float | None]
    sigma2: float | None
    converged: bool
    iterations: int
    fallback_used: bool | None = None
    score_norm: float | None = None
    moments: MomentsOut | None = None
    diagnostics: DiagnosticsOut
    ic: IcOut | None = None
    timing_seconds: float
    notes: list[str] = Field(default_factory=list)


class FitResponse(BaseModel):
    schema_version: int
    n: int
    d: int
    n_eff: int
    method: Method
    blocks: dict[str, FitBlock]


class Thresholds(BaseModel):
    gamma3_symmetric: float = 0.5
    gamma4_normal: float = 1.0
    min_sample: int = 200
    min_re: float = 1.2


class SelectRequest(BaseModel):
    values: list[float] = Field(min_length=8)
    order: Order
    intercept: bool = False
    thresholds: Thresholds = Field(default_factory=Thresholds)


class SelectResponse(BaseModel):
    schema_version: int
    recommendation: str
    gamma3_hat: float
    gamma4_hat: float
    re_theoretical: float | None
    rationale: str
    n: int


class ValidateRequest(BaseModel):
    values: list[float] = Field(min_length=8)
    order: Order
    mode: Literal["fixed", "rolling"] = "fixed"
    split: float = Field(default=0.8, gt=0.0, lt=1.0)
    window: int | None = Field(default=None, ge=1)
    refit_every: int = Field(default=1, ge=1)
    methods: list[Literal["ols", "css", "pmm2"]] = Field(default_factory=lambda: ["css", "pmm2"])
    intercept: bool = False


class MethodValidationOut(BaseModel):
    rmse: float
    mae: float
    n_forecasts: int
    errors: list[float]


class ValidateResponse(BaseModel):
    schema_version: int
    mode: str
    split: float | None
    window: int | None
    refit_every: int
    methods: dict[str, MethodValidationOut]
    improvement_pct: float | None


class McRequest(BaseModel):
    config: dict[str, Any]
    workers: int | None = Field(default=None, ge=1)


class McResponse(BaseModel):
    report: dict[str, Any]


class Health(BaseModel):
    status: str
    version: str
