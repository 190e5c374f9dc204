"""Distributional conformal prediction engines.

Three routes to a prediction interval from estimated conditional ranks:

* the full method, which tests every candidate outcome on a trial grid by
  refitting the CDF on the augmented sample and permuting rank scores;
* the split method, which fits once, calibrates a score threshold on held-out
  ranks, and inverts the fitted CDF;
* the optimal split variant, which recenters the rank score by an estimated
  shape adjustment so the interval targets the shortest conditional interval
  instead of the central one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (Dataset, IntervalSet, TrialGrid, conformal_quantile,
                   split_indices, validate_alpha)
from .errors import DcpError, InvalidArgumentError
from .regress import CdfModel, EstimatorConfig, invert_cdf, invert_cdf_upper


def score_baseline(u):
    """Distance of a conditional rank from the median level: |u - 1/2|."""
    return np.abs(np.clip(u, 0.0, 1.0) - 0.5)


def score_optimal(u, b, alpha: float):
    """Shape-adjusted rank score |u - b - (1-alpha)/2|, with b in [0, alpha].

    At the true CDF and the true adjustment, the population (1-alpha)-quantile
    of this score is (1-alpha)/2 regardless of the outcome distribution.
    """
    alpha = validate_alpha(alpha)
    b_arr = np.asarray(b, dtype=np.float64)
    if np.any(b_arr < -1e-12) or np.any(b_arr > alpha + 1e-12):
        raise InvalidArgumentError("shape adjustment b must lie in [0, alpha]")
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
    return np.abs(u - b_arr - 0.5 * (1.0 - alpha))


def estimate_b(model: CdfModel, x, alpha: float, z_step: float | None = None) -> float:
    """Quantile index of the lower end of the shortest (1-alpha) interval.

    Grid-minimizes z -> Q(z + 1 - alpha, x) - Q(z, x) over z in {0, z_step,
    ..., alpha}; ties resolve to the smallest z.  Symmetric unimodal
    distributions give alpha/2; right-skewed ones give values near 0.
    """
    alpha = validate_alpha(alpha)
    if z_step is None:
        z_step = alpha / 100.0
    if z_step > alpha / 10.0 + 1e-12 or z_step <= 0.0:
        raise InvalidArgumentError("z_step must be positive and at most alpha/10")
    zs = _b_grid(alpha, z_step)
    upper = model.quantile_values(x, zs + (1.0 - alpha))
    lower = model.quantile_values(x, zs)
    lengths = np.where(np.isnan(upper - lower), np.inf, upper - lower)
    return float(zs[_first_min(lengths)])


def estimate_b_batch(model: CdfModel, xs, alpha: float,
                     z_step: float | None = None) -> np.ndarray:
    """Vectorized :func:`estimate_b` over many predictor rows."""
    alpha = validate_alpha(alpha)
    if z_step is None:
        z_step = alpha / 100.0
    if z_step > alpha / 10.0 + 1e-12 or z_step <= 0.0:
        raise InvalidArgumentError("z_step must be positive and at most alpha/10")
    zs = _b_grid(alpha, z_step)
    upper = model.quantile_matrix(xs, zs + (1.0 - alpha))
    lower = model.quantile_matrix(xs, zs)
    lengths = np.where(np.isnan(upper - lower), np.inf, upper - lower)
    best = np.min(lengths, axis=1)
    cutoff = best + 1e-12 * (1.0 + np.abs(best))
    return zs[np.argmax(lengths <= cutoff[:, None], axis=1)]


def _b_grid(alpha: float, z_step: float) -> np.ndarray:
    n_steps = int(np.floor(alpha / z_step + 1e-9))
    zs = np.arange(n_steps + 1) * z_step
    if zs[-1] < alpha - 1e-12:
        zs = np.append(zs, alpha)
    return np.minimum(zs, alpha)


def _first_min(lengths: np.ndarray) -> int:
    """Index of the first entry tied (to float noise) with the minimum.

    Mathematical ties between candidate z values must resolve to the smallest
    z, and differences below 1e-12 relative are rounding, not signal.
    """
    best = float(np.min(lengths))
    cutoff = best + 1e-12 * (1.0 + abs(best))
    return int(np.argmax(lengths <= cutoff))


@dataclass(frozen=True)
class ConformityScore:
    """Rank score specification: baseline or shape-adjusted.

    For the adjusted kind, ``b_hat`` maps a predictor vector to the estimated
    adjustment, computed from a model frozen on the fitting half.
    """

    kind: str
    alpha: float
    b_hat: Callable[[np.ndarray], float] | None = None

    def __post_init__(self):
        if self.kind not in ("baseline", "optimal"):
            raise InvalidArgumentError(f"unknown score kind {self.kind!r}")
        validate_alpha(self.alpha)
        if self.kind == "optimal" and self.b_hat is None:
            raise InvalidArgumentError("optimal score needs a fitted b function")

    def center(self, x) -> float:
        """The rank-space center of the acceptance band at predictor x."""
        if self.kind == "baseline":
            return 0.5
        return float(self.b_hat(x)) + 0.5 * (1.0 - self.alpha)

    def values(self, u, xs=None, b=None) -> np.ndarray:
        """Scores for ranks u; adjusted scores need per-row b values."""
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        if self.kind == "baseline":
            return score_baseline(u)
        if b is None:
            xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
            b = np.array([self.b_hat(xs[i]) for i in range(xs.shape[0])])
        return score_optimal(u, b, self.alpha)


def p_value(scores) -> float:
    """Augmented-sample permutation p-value: share of scores >= the last one.

    The last entry is the score of the trial point; ties count toward
    acceptance, which keeps the guarantee conservative.
    """
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError("scores must be a non-empty vector")
    return float(np.mean(arr >= arr[-1]))


@dataclass(frozen=True)
class FullDcpResult:
    """Per-grid-point p-values and the accepted set closed to its hull."""

    grid: TrialGrid
    p_values: np.ndarray
    accepted: IntervalSet
    failed: np.ndarray  # grid points whose refit raised (flagged, not fatal)


def full_dcp(data: Dataset, x_new, alpha: float, estimator: EstimatorConfig,
             grid: TrialGrid) -> FullDcpResult:
    """Full conformal search: refit the CDF for every trial outcome.

    For each grid value y, the estimator is refit on the sample augmented
    with (y, x_new), ranks of all T+1 points are scored with |u - 1/2|, and y
    is accepted iff its permutation p-value exceeds alpha.  Estimator errors
    abort only the offending grid point.
    """
    alpha = validate_alpha(alpha)
    x_new = np.asarray(x_new, dtype=np.float64).ravel()
    if x_new.size != data.n_features:
        raise InvalidArgumentError("x_new dimension does not match the data")
    aug_x = np.vstack([data.x, x_new])
    n_grid = grid.values.size
    p_vals = np.full(n_grid, np.nan)
    failed = np.zeros(n_grid, dtype=bool)
    for i, y0 in enumerate(grid.values):
        aug_y = np.append(data.y, y0)
        try:
            model = estimator.fit(aug_y, aug_x)
            ranks = np.clip(model.cdf_at(aug_x, aug_y), 0.0, 1.0)
        except (DcpError, np.linalg.LinAlgError):
            failed[i] = True
            continue
        p_vals[i] = p_value(score_baseline(ranks))
    accepted_mask = np.where(np.isnan(p_vals), False, p_vals > alpha)
    if not np.any(accepted_mask):
        accepted = IntervalSet.empty_set()
    else:
        members = grid.values[accepted_mask]
        accepted = IntervalSet(float(members.min()), float(members.max()),
                               raw_members=members)
    return FullDcpResult(grid, p_vals, accepted, failed)


@dataclass(frozen=True)
class SplitModel:
    """Frozen CDF model, score definition, and calibrated threshold."""

    model: CdfModel
    score: ConformityScore
    threshold: float
    split_sizes: tuple[int, int]

    @property
    def alpha(self) -> float:
        return self.score.alpha


def split_dcp_fit(data: Dataset, split_frac: float, alpha: float,
                  estimator: EstimatorConfig, score_kind: str = "baseline",
                  *, seed: int | None = None,
                  b_step: float | None = None) -> SplitModel:
    """Fit on one half, calibrate the rank-score threshold on the other.

    Time-ordered data splits contiguously; otherwise a seeded random split is
    used when a seed is given.  With ``score_kind="optimal"`` the shape
    adjustment is estimated on the fitting half and baked into the score.
    """
    alpha = validate_alpha(alpha)
    idx1, idx2 = split_indices(data.n_obs, split_frac,
                               time_ordered=data.time_ordered, seed=seed)
    p_design = data.n_features + (1 if estimator.add_intercept else 0)
    min_part = max(p_design + 1, 10)
    if idx1.size < min_part or idx2.size < min_part:
        raise InvalidArgumentError(
            f"both split parts need at least {min_part} rows, "
            f"got {idx1.size} and {idx2.size}")

    y1, x1 = data.y[idx1], data.x[idx1]
    y2, x2 = data.y[idx2], data.x[idx2]
    model = estimator.fit(y1, x1)

    if score_kind == "baseline":
        score = ConformityScore("baseline", alpha)
        b2 = None
    elif score_kind == "optimal":
        def b_hat(x, _model=model, _alpha=alpha, _step=b_step):
            return estimate_b(_model, x, _alpha, _step)

        score = ConformityScore("optimal", alpha, b_hat)
        b2 = estimate_b_batch(model, x2, alpha, b_step)
    else:
        raise InvalidArgumentError(f"unknown score kind {score_kind!r}")

    ranks = np.clip(model.cdf_at(x2, y2), 0.0, 1.0)
    scores = score.values(ranks, xs=x2, b=b2)
    threshold = conformal_quantile(scores, alpha)
    return SplitModel(model, score, threshold, (idx1.size, idx2.size))


def split_dcp_predict(model: SplitModel, x_new, grid: TrialGrid) -> IntervalSet:
    """Invert the calibrated rank band into an outcome interval on the grid.

    The interval is {y : psi(F(y, x)) <= threshold} snapped to the grid: the
    lower endpoint is the inf of the band (smallest grid y with F >= lo), the
    upper is its sup (largest grid y with F <= hi).  An infinite threshold
    (calibration set smaller than the level requires) degrades to the
    trial-grid hull with the infinite flag set.
    """
    if np.isinf(model.threshold):
        return IntervalSet(grid.min, grid.max, infinite=True)
    center = model.score.center(np.asarray(x_new, dtype=np.float64))
    lo_tau = max(center - model.threshold, 0.0)
    hi_tau = min(center + model.threshold, 1.0)
    lower = invert_cdf(model.model, x_new, lo_tau, grid)
    upper = invert_cdf_upper(model.model, x_new, hi_tau, grid)
    if upper < lower:
        upper = lower
    return IntervalSet(lower, upper)
