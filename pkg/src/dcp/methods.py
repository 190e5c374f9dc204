"""Method registry: name-keyed construction of every prediction method.

This is the seam shared by the evaluation protocols, the service, and the
CLI.  User-facing data carries raw predictors; this layer prepends the
intercept column before fitting and at prediction time, so linear models are
specified the way users expect.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import baselines, conformal
from .core import Dataset, IntervalSet, TauGrid, TrialGrid, make_trial_grid, validate_alpha
from .errors import InvalidArgumentError
from .regress import EstimatorConfig, _with_intercept

METHOD_NAMES = ("dcp-qr", "dcp-qr-opt", "dcp-dr", "dcp-full",
                "cqr", "cqr-m", "cqr-r", "cp-ols", "cp-loc")


@dataclass(frozen=True)
class MethodConfig:
    """Everything needed to fit one method on one training set."""

    method: str
    alpha: float = 0.1
    split_frac: float = 0.5
    seed: int = 0
    tau_points: int = 999
    tau_trim: float = 0.001
    trial_points: int = 1000
    dr_link: str = "logit"
    dr_levels: int = 99

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise InvalidArgumentError(
                f"unknown method {self.method!r}; expected one of {METHOD_NAMES}")
        validate_alpha(self.alpha)
        if not (0.0 < self.split_frac < 1.0):
            raise InvalidArgumentError("split_frac must lie in (0, 1)")

    def with_split(self, split_frac: float) -> "MethodConfig":
        return replace(self, split_frac=split_frac)

    def estimator(self) -> EstimatorConfig:
        tau_grid = TauGrid.make(self.tau_trim, self.tau_points)
        if self.method in ("dcp-qr", "dcp-qr-opt", "dcp-full"):
            return EstimatorConfig("qr", tau_grid, add_intercept=True)
        if self.method == "dcp-dr":
            return EstimatorConfig("dr", tau_grid, dr_levels=self.dr_levels,
                                   link=self.dr_link, add_intercept=True)
        raise InvalidArgumentError(f"{self.method} has no CDF estimator")


@dataclass
class FittedMethod:
    """A fitted method ready to produce intervals for new predictor rows."""

    cfg: MethodConfig
    grid: TrialGrid
    split: conformal.SplitModel | None = None
    baseline: baselines.BaselineModel | None = None
    full_train: Dataset | None = None
    full_estimator: EstimatorConfig | None = None

    @property
    def threshold(self) -> float | None:
        if self.split is not None:
            return self.split.threshold
        if self.baseline is not None:
            return self.baseline.threshold
        return None

    @property
    def split_sizes(self) -> tuple[int, int]:
        if self.split is not None:
            return self.split.split_sizes
        if self.baseline is not None:
            return self.baseline.split_sizes
        return (self.full_train.n_obs, 0)

    def predict(self, xs) -> list[IntervalSet]:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        if self.split is not None:
            return [conformal.split_dcp_predict(self.split, xs[i], self.grid)
                    for i in range(xs.shape[0])]
        if self.baseline is not None:
            design = _with_intercept(xs)
            if self.baseline.method.startswith("cqr"):
                return [baselines.cqr_predict(self.baseline, design[i])
                        for i in range(design.shape[0])]
            return [baselines.cp_mean_predict(self.baseline, design[i])
                    for i in range(design.shape[0])]
        out = []
        for i in range(xs.shape[0]):
            res = conformal.full_dcp(self.full_train, xs[i], self.cfg.alpha,
                                     self.full_estimator, self.grid)
            out.append(res.accepted)
        return out


def fit_method(cfg: MethodConfig, train: Dataset) -> FittedMethod:
    """Fit the configured method on a training set (raw predictors)."""
    grid = make_trial_grid(train, cfg.trial_points)
    if cfg.method in ("dcp-qr", "dcp-qr-opt", "dcp-dr"):
        score_kind = "optimal" if cfg.method == "dcp-qr-opt" else "baseline"
        split = conformal.split_dcp_fit(train, cfg.split_frac, cfg.alpha,
                                        cfg.estimator(), score_kind)
        return FittedMethod(cfg, grid, split=split)
    if cfg.method == "dcp-full":
        return FittedMethod(cfg, grid, full_train=train,
                            full_estimator=cfg.estimator())
    design_data = Dataset(train.y, _with_intercept(train.x),
                          time_ordered=train.time_ordered)
    if cfg.method in ("cqr", "cqr-m", "cqr-r"):
        variant = cfg.method.replace("-", "_")
        model = baselines.cqr_fit(design_data, cfg.split_frac, cfg.alpha, variant)
        return FittedMethod(cfg, grid, baseline=model)
    weighted = cfg.method == "cp-loc"
    model = baselines.cp_mean_fit(design_data, cfg.split_frac, cfg.alpha, weighted)
    return FittedMethod(cfg, grid, baseline=model)
