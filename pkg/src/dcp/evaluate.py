"""Coverage and length metrics, conditional-coverage diagnostics, and the two
evaluation protocols (random holdout and rolling time-series)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .core import Dataset, IntervalSet
from .errors import InvalidArgumentError
from .methods import MethodConfig, fit_method
from .regress import _with_intercept, newton_glm
from .rng import DeterministicRng


class CoverageStats(NamedTuple):
    coverage: float
    avg_length: float | None   # mean over finite intervals; None if all infinite
    n_infinite: int


class BinStat(NamedTuple):
    lo: float
    hi: float
    coverage: float | None     # None marks an empty bin
    avg_length: float | None
    n: int


@dataclass(frozen=True)
class CoverageReport:
    """One method's coverage diagnostics on one test set."""

    method: str
    n_test: int
    coverage: float
    avg_length: float | None
    n_infinite: int
    binned: tuple[BinStat, ...]
    dispersion_x100: float | None


def _interval_arrays(intervals: Sequence[IntervalSet], y_test: np.ndarray):
    if len(intervals) != y_test.size:
        raise InvalidArgumentError("intervals and y_test lengths differ")
    covered = np.fromiter((iv.contains(float(y)) for iv, y in zip(intervals, y_test)),
                          dtype=bool, count=y_test.size)
    infinite = np.fromiter((iv.infinite for iv in intervals), dtype=bool,
                           count=y_test.size)
    lengths = np.fromiter((iv.length for iv in intervals), dtype=np.float64,
                          count=y_test.size)
    return covered, infinite, lengths


def coverage_metrics(intervals: Sequence[IntervalSet], y_test) -> CoverageStats:
    """Fraction of outcomes inside their (closed) interval, mean finite length.

    Infinite intervals cover everything by convention; they are excluded from
    the average length and counted separately.
    """
    y_test = np.asarray(y_test, dtype=np.float64)
    covered, infinite, lengths = _interval_arrays(intervals, y_test)
    finite = ~infinite
    avg_length = float(np.mean(lengths[finite])) if np.any(finite) else None
    return CoverageStats(float(np.mean(covered)), avg_length, int(infinite.sum()))


def binned_coverage(intervals: Sequence[IntervalSet], y_test, feature,
                    n_bins: int = 20) -> list[BinStat]:
    """Coverage and length by quantile bins of a conditioning feature.

    Bin edges are equally spaced empirical quantiles; bins are right-closed,
    the last takes any remainder, and empty bins (possible under heavy ties)
    are reported as missing rather than failing.
    """
    if n_bins < 2:
        raise InvalidArgumentError("n_bins must be at least 2")
    y_test = np.asarray(y_test, dtype=np.float64)
    feature = np.asarray(feature, dtype=np.float64)
    if feature.size != y_test.size:
        raise InvalidArgumentError("feature and y_test lengths differ")
    covered, infinite, lengths = _interval_arrays(intervals, y_test)
    edges = np.quantile(feature, np.linspace(0.0, 1.0, n_bins + 1))
    idx = np.searchsorted(edges[1:-1], feature, side="left")
    out = []
    for b in range(n_bins):
        mask = idx == b
        n = int(mask.sum())
        if n == 0:
            out.append(BinStat(float(edges[b]), float(edges[b + 1]), None, None, 0))
            continue
        fin = mask & ~infinite
        avg_len = float(np.mean(lengths[fin])) if np.any(fin) else None
        out.append(BinStat(float(edges[b]), float(edges[b + 1]),
                           float(np.mean(covered[mask])), avg_len, n))
    return out


def coverage_dispersion(cover_indicator, x_test, ridge: float = 1e-4) -> float:
    """Dispersion (std x 100) of logistic-regression-predicted coverage.

    A perfectly flat conditional coverage profile gives values near zero; a
    degenerate all-covered or all-missed indicator short-circuits to exactly
    zero (perfect separation has no dispersion to measure).
    """
    ind = np.asarray(cover_indicator, dtype=np.float64)
    x_test = np.atleast_2d(np.asarray(x_test, dtype=np.float64))
    if ind.ndim != 1 or ind.size != x_test.shape[0]:
        raise InvalidArgumentError("indicator and x_test are misaligned")
    if ind.size < 2:
        raise InvalidArgumentError("need at least two test rows")
    if np.all(ind == ind[0]):
        return 0.0
    design = _with_intercept(x_test)
    beta, _ = newton_glm(design, ind, ridge=ridge, link="logit")
    probs = expit(design @ beta)
    return float(np.std(probs) * 100.0)


def evaluate_predictions(method: str, intervals: Sequence[IntervalSet], y_test,
                         feature, x_test, n_bins: int = 20) -> CoverageReport:
    """Assemble the full report for one method on one test set."""
    y_test = np.asarray(y_test, dtype=np.float64)
    stats = coverage_metrics(intervals, y_test)
    bins = binned_coverage(intervals, y_test, feature, n_bins)
    covered, _, _ = _interval_arrays(intervals, y_test)
    dispersion = coverage_dispersion(covered.astype(np.float64), x_test)
    return CoverageReport(method, y_test.size, stats.coverage, stats.avg_length,
                          stats.n_infinite, tuple(bins), dispersion)


# ---------------------------------------------------------------------------
# protocols
# ---------------------------------------------------------------------------

def holdout_eval(data: Dataset, cfg: MethodConfig, n_bins: int = 20,
                 test_frac: float = 0.2) -> tuple[CoverageReport, int]:
    """Random-holdout protocol: 20% test, split conformal on the rest.

    Returns the report and the training-set size.  The holdout permutation is
    seeded from the config, so runs are reproducible.
    """
    n = data.n_obs
    n_test = int(n * test_frac)
    if n_test < 1 or n - n_test < 4:
        raise InvalidArgumentError("dataset too small for a holdout split")
    perm = DeterministicRng(cfg.seed, stream=7).permutation(n)
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    train = data.subset(train_idx)
    fitted = fit_method(cfg, train)
    x_test, y_test = data.x[test_idx], data.y[test_idx]
    intervals = fitted.predict(x_test)
    report = evaluate_predictions(cfg.method, intervals, y_test,
                                  x_test[:, 0], x_test, n_bins)
    return report, train.n_obs


def rolling_windows(n: int) -> list[tuple[slice, slice]]:
    """Window arithmetic of the five-exercise rolling scheme.

    With step s = floor(n/10), exercise j trains on rows [j*s, j*s + 5s) and
    tests on [j*s + 5s, j*s + 6s); each exercise drops the first j*10% of the
    sample.
    """
    s = n // 10
    if s < 2:
        raise InvalidArgumentError("need at least 20 observations for rolling windows")
    return [(slice(j * s, j * s + 5 * s), slice(j * s + 5 * s, j * s + 6 * s))
            for j in range(5)]


def rolling_ts_eval(data: Dataset, cfg: MethodConfig, n_bins: int = 20
                    ) -> tuple[list[CoverageReport], CoverageReport]:
    """Five consecutive prediction exercises on a time-ordered sample.

    Each exercise applies split conformal prediction with an equal contiguous
    split to its training window.  The pooled report averages bin-wise over
    exercises; dispersion is computed on the pooled test points.
    """
    if not data.time_ordered:
        raise InvalidArgumentError("rolling evaluation requires time-ordered data")
    if data.n_obs < 100:
        raise InvalidArgumentError("need at least 100 observations")
    windows = rolling_windows(data.n_obs)
    cfg_eq = cfg.with_split(0.5)
    reports = []
    covered_all, x_all = [], []
    for train_sl, test_sl in windows:
        train = data.subset(np.arange(train_sl.start, train_sl.stop))
        fitted = fit_method(cfg_eq, train)
        x_test = data.x[test_sl]
        y_test = data.y[test_sl]
        intervals = fitted.predict(x_test)
        reports.append(evaluate_predictions(cfg.method, intervals, y_test,
                                            x_test[:, 0], x_test, n_bins))
        covered, _, _ = _interval_arrays(intervals, y_test)
        covered_all.append(covered.astype(np.float64))
        x_all.append(x_test)
    pooled = _pool_reports(cfg.method, reports,
                           np.concatenate(covered_all), np.vstack(x_all), n_bins)
    return reports, pooled


def _mean_or_none(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def _pool_reports(method: str, reports: list[CoverageReport],
                  covered_all: np.ndarray, x_all: np.ndarray,
                  n_bins: int) -> CoverageReport:
    bins = []
    for b in range(n_bins):
        stats = [r.binned[b] for r in reports]
        cov = _mean_or_none([s.coverage for s in stats])
        length = _mean_or_none([s.avg_length for s in stats])
        bins.append(BinStat(float(np.mean([s.lo for s in stats])),
                            float(np.mean([s.hi for s in stats])),
                            cov, length, int(sum(s.n for s in stats))))
    dispersion = coverage_dispersion(covered_all, x_all)
    return CoverageReport(
        method,
        n_test=int(sum(r.n_test for r in reports)),
        coverage=float(np.mean([r.coverage for r in reports])),
        avg_length=_mean_or_none([r.avg_length for r in reports]),
        n_infinite=int(sum(r.n_infinite for r in reports)),
        binned=tuple(bins),
        dispersion_x100=dispersion,
    )
