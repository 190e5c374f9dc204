"""Comparator split-conformal methods.

Five standard baselines calibrated with the same conformal quantile rule as
the rank-based methods: conformalized quantile regression and its two scaled
variants, plus mean-based conformal prediction with and without a local
variability weight.  The CQR-m and CQR-r score formulas are reconstructions
of the cited variants (the source tables use them only as comparators): CQR-r
divides the CQR score by the fitted interval width, CQR-m scales each side's
deviation by its distance to the fitted median.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, IntervalSet, conformal_quantile, split_indices, validate_alpha
from .errors import InvalidArgumentError
from .regress import OlsFit, fit_ols, fit_qr

_FLOOR = 1e-6

CQR_VARIANTS = ("cqr", "cqr_m", "cqr_r")


@dataclass(frozen=True)
class BaselineModel:
    """Fitted comparator: quantile or mean fits plus a calibrated threshold."""

    method: str
    alpha: float
    threshold: float
    split_sizes: tuple[int, int]
    beta_lo: np.ndarray | None = None
    beta_hi: np.ndarray | None = None
    beta_mid: np.ndarray | None = None
    ols: OlsFit | None = None
    n_crossings: int = 0


def _split(data: Dataset, split_frac: float, seed: int | None, p_extra: int = 0):
    idx1, idx2 = split_indices(data.n_obs, split_frac,
                               time_ordered=data.time_ordered, seed=seed)
    min_part = max(data.n_features + 1 + p_extra, 10)
    if idx1.size < min_part or idx2.size < min_part:
        raise InvalidArgumentError(
            f"both split parts need at least {min_part} rows, "
            f"got {idx1.size} and {idx2.size}")
    return idx1, idx2


def cqr_fit(data: Dataset, split_frac: float, alpha: float,
            variant: str = "cqr", *, seed: int | None = None) -> BaselineModel:
    """Fit the lower/upper (and for cqr_m the median) quantile regressions on
    one half and calibrate the variant's score on the other.

    Crossing fitted quantiles at a calibration point are swapped and counted,
    not fatal.
    """
    alpha = validate_alpha(alpha)
    if variant not in CQR_VARIANTS:
        raise InvalidArgumentError(f"unknown CQR variant {variant!r}")
    idx1, idx2 = _split(data, split_frac, seed)
    y1, x1 = data.y[idx1], data.x[idx1]
    y2, x2 = data.y[idx2], data.x[idx2]

    beta_lo = fit_qr(x1, y1, alpha / 2.0)
    beta_hi = fit_qr(x1, y1, 1.0 - alpha / 2.0)
    beta_mid = fit_qr(x1, y1, 0.5) if variant == "cqr_m" else None

    q_lo = x2 @ beta_lo
    q_hi = x2 @ beta_hi
    crossed = q_lo > q_hi
    n_cross = int(crossed.sum())
    if n_cross:
        q_lo, q_hi = np.where(crossed, q_hi, q_lo), np.where(crossed, q_lo, q_hi)

    base = np.maximum(q_lo - y2, y2 - q_hi)
    if variant == "cqr":
        scores = base
    elif variant == "cqr_r":
        scores = base / np.maximum(q_hi - q_lo, _FLOOR)
    else:
        q_mid = x2 @ beta_mid
        scores = np.maximum((q_lo - y2) / np.maximum(q_mid - q_lo, _FLOOR),
                            (y2 - q_hi) / np.maximum(q_hi - q_mid, _FLOOR))
    threshold = conformal_quantile(scores, alpha)
    return BaselineModel(variant, alpha, threshold, (idx1.size, idx2.size),
                         beta_lo=beta_lo, beta_hi=beta_hi, beta_mid=beta_mid,
                         n_crossings=n_cross)


def cqr_predict(model: BaselineModel, x_new) -> IntervalSet:
    """Inflate the fitted quantile band by the calibrated threshold."""
    if model.method not in CQR_VARIANTS:
        raise InvalidArgumentError(f"not a CQR model: {model.method!r}")
    x = np.asarray(x_new, dtype=np.float64).ravel()
    q_lo = float(x @ model.beta_lo)
    q_hi = float(x @ model.beta_hi)
    if q_lo > q_hi:
        q_lo, q_hi = q_hi, q_lo
    t = model.threshold
    if np.isinf(t):
        return IntervalSet(-np.inf, np.inf, infinite=True)
    if model.method == "cqr":
        lower, upper = q_lo - t, q_hi + t
    elif model.method == "cqr_r":
        w = max(q_hi - q_lo, _FLOOR)
        lower, upper = q_lo - t * w, q_hi + t * w
    else:
        q_mid = float(x @ model.beta_mid)
        lower = q_lo - t * max(q_mid - q_lo, _FLOOR)
        upper = q_hi + t * max(q_hi - q_mid, _FLOOR)
    if lower > upper:
        # a strongly negative threshold can invert a narrow band; collapse
        # to the midpoint rather than report an inverted interval
        mid = 0.5 * (lower + upper)
        lower = upper = mid
    return IntervalSet(lower, upper)


def cp_mean_fit(data: Dataset, split_frac: float, alpha: float,
                weighted: bool = False, *, seed: int | None = None) -> BaselineModel:
    """Mean-based split conformal: OLS fit, absolute residual scores.

    With ``weighted`` the residuals are divided by a fitted local scale
    (|residual| regressed on x, floored at 1e-6), which restores some
    adaptivity to heteroskedasticity.
    """
    alpha = validate_alpha(alpha)
    idx1, idx2 = _split(data, split_frac, seed)
    ols = fit_ols(data.subset(idx1), fit_scale=weighted)
    y2, x2 = data.y[idx2], data.x[idx2]
    resid = np.abs(y2 - x2 @ ols.beta)
    if weighted:
        scale = np.maximum(x2 @ ols.scale_beta, _FLOOR)
        scores = resid / scale
    else:
        scores = resid
    threshold = conformal_quantile(scores, alpha)
    return BaselineModel("cp_loc" if weighted else "cp_ols", alpha, threshold,
                         (idx1.size, idx2.size), ols=ols)


def cp_mean_predict(model: BaselineModel, x_new) -> IntervalSet:
    """Symmetric band around the fitted mean; width constant for cp_ols,
    proportional to the fitted scale for cp_loc."""
    if model.method not in ("cp_ols", "cp_loc"):
        raise InvalidArgumentError(f"not a mean-based model: {model.method!r}")
    x = np.asarray(x_new, dtype=np.float64).ravel()
    center = float(x @ model.ols.beta)
    if np.isinf(model.threshold):
        return IntervalSet(-np.inf, np.inf, infinite=True)
    scale = 1.0 if model.method == "cp_ols" else max(float(x @ model.ols.scale_beta), _FLOOR)
    half = model.threshold * scale
    return IntervalSet(center - half, center + half)
