"""Pydantic request/response models for the service (and reused by the CLI).

The report schema is the package's stable JSON contract:
{method, alpha, n_train, n_test, coverage, avg_length, n_infinite,
 bins: [{lo, hi, coverage, length, n}], dispersion_x100, seed, config_echo}.
Infinite or undefined quantities are encoded as null, never as IEEE inf.
"""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, Field

from .core import Dataset, IntervalSet
from .evaluate import CoverageReport
from .methods import METHOD_NAMES, MethodConfig
from .sim import DGP_KINDS

MethodName = Literal["dcp-qr", "dcp-qr-opt", "dcp-dr", "dcp-full",
                     "cqr", "cqr-m", "cqr-r", "cp-ols", "cp-loc"]
DgpName = Literal["location_scale", "skewed_exponential", "ar_garch_like"]

assert set(MethodName.__args__) == set(METHOD_NAMES)
assert set(DgpName.__args__) == set(DGP_KINDS)


class DataPayload(BaseModel):
    y: list[float]
    x: list[list[float]]
    time_ordered: bool = False

    def to_dataset(self, time_ordered: bool | None = None) -> Dataset:
        flag = self.time_ordered if time_ordered is None else time_ordered
        return Dataset(self.y, self.x, time_ordered=flag)

    @classmethod
    def from_dataset(cls, data: Dataset) -> "DataPayload":
        return cls(y=data.y.tolist(), x=data.x.tolist(), time_ordered=data.time_ordered)


class CommonConfig(BaseModel):
    alpha: float = Field(0.1, gt=0.0, lt=1.0)
    split_frac: float = Field(0.5, gt=0.0, lt=1.0)
    seed: int = 0
    tau_points: int = Field(999, ge=1)
    tau_trim: float = Field(0.001, gt=0.0, lt=0.5)
    trial_points: int = Field(1000, ge=2)
    n_bins: int = Field(20, ge=2)
    time_ordered: bool = False
    dr_link: Literal["logit", "probit"] = "logit"
    dr_levels: int = Field(99, ge=1)

    def to_method_config(self, method: str) -> MethodConfig:
        return MethodConfig(method=method, alpha=self.alpha,
                            split_frac=self.split_frac, seed=self.seed,
                            tau_points=self.tau_points, tau_trim=self.tau_trim,
                            trial_points=self.trial_points, dr_link=self.dr_link,
                            dr_levels=self.dr_levels)


class RunConfig(CommonConfig):
    method: MethodName


class RunRequest(BaseModel):
    config: RunConfig
    data: DataPayload


class BinOut(BaseModel):
    lo: float | None
    hi: float | None
    coverage: float | None
    length: float | None
    n: int


class ReportOut(BaseModel):
    method: str
    alpha: float
    n_train: int
    n_test: int
    coverage: float
    avg_length: float | None
    n_infinite: int
    bins: list[BinOut]
    dispersion_x100: float | None
    seed: int
    config_echo: dict

    @classmethod
    def from_report(cls, report: CoverageReport, config: RunConfig,
                    n_train: int) -> "ReportOut":
        bins = [BinOut(lo=b.lo, hi=b.hi, coverage=b.coverage,
                       length=b.avg_length, n=b.n) for b in report.binned]
        return cls(method=report.method, alpha=config.alpha, n_train=n_train,
                   n_test=report.n_test, coverage=report.coverage,
                   avg_length=report.avg_length, n_infinite=report.n_infinite,
                   bins=bins, dispersion_x100=report.dispersion_x100,
                   seed=config.seed, config_echo=config.model_dump())


class BenchRequest(BaseModel):
    methods: list[MethodName] = Field(min_length=1)
    config: CommonConfig = CommonConfig()
    data: DataPayload


class BenchOut(BaseModel):
    entries: list[ReportOut]   # sorted by average length, shortest first


class SimulateRequest(BaseModel):
    dgp: DgpName
    t: int = Field(ge=1)
    seed: int = 0


class SimulateResponse(BaseModel):
    columns: list[str]
    rows: list[list[float]]
    time_ordered: bool


class FitRequest(BaseModel):
    config: RunConfig
    data: DataPayload


class FitResponse(BaseModel):
    model_id: str
    method: str
    threshold: float | None
    threshold_infinite: bool
    n_fit: int
    n_calibration: int


class PredictRequest(BaseModel):
    x: list[list[float]]


class IntervalOut(BaseModel):
    lower: float | None
    upper: float | None
    infinite: bool

    @classmethod
    def from_interval(cls, iv: IntervalSet) -> "IntervalOut":
        lower = None if (iv.empty or math.isinf(iv.lower)) else iv.lower
        upper = None if (iv.empty or math.isinf(iv.upper)) else iv.upper
        return cls(lower=lower, upper=upper, infinite=iv.infinite)


class PredictResponse(BaseModel):
    intervals: list[IntervalOut]


class HealthResponse(BaseModel):
    status: str
    version: str
