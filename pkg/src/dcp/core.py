"""Core data containers, grid constructions, and the conformal quantile rule.

Everything here is an immutable value object or a pure function, shared by all
prediction methods in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .rng import DeterministicRng


def validate_alpha(alpha: float) -> float:
    """Check a miscoverage level, returning it as a plain float."""
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0) or not math.isfinite(alpha):
        raise InvalidArgumentError(f"alpha must lie strictly in (0, 1), got {alpha!r}")
    return alpha


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Outcome vector plus predictor matrix.

    ``x`` is used literally as the design matrix by the estimators; callers
    that want an intercept include a constant column (the method layer does
    this automatically for user data).
    """

    y: np.ndarray
    x: np.ndarray
    time_ordered: bool = False

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        if y.ndim != 1:
            raise InvalidArgumentError("y must be one-dimensional")
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise InvalidArgumentError("x must be a matrix")
        if y.shape[0] != x.shape[0]:
            raise InvalidArgumentError(
                f"y has {y.shape[0]} rows but x has {x.shape[0]}")
        if y.shape[0] < 2:
            raise InvalidArgumentError("need at least two observations")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise InvalidArgumentError("non-finite entries in data")
        object.__setattr__(self, "y", _frozen_array(y))
        object.__setattr__(self, "x", _frozen_array(x))

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.y[idx], self.x[idx], time_ordered=self.time_ordered)


@dataclass(frozen=True)
class TauGrid:
    """Quantile-level grid used to trace the fitted conditional CDF.

    The convention is an equally spaced, symmetric grid from ``trim`` to
    ``1 - trim``.  ``step`` is the Riemann weight each level carries when the
    CDF is assembled as trim + step * count.
    """

    taus: np.ndarray

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=np.float64)
        if taus.ndim != 1 or taus.size == 0:
            raise InvalidArgumentError("tau grid must be a non-empty vector")
        if np.any(taus <= 0.0) or np.any(taus >= 1.0):
            raise InvalidArgumentError("tau grid entries must lie in (0, 1)")
        if taus.size > 1 and np.any(np.diff(taus) <= 0.0):
            raise InvalidArgumentError("tau grid must be strictly increasing")
        if not np.allclose(taus + taus[::-1], 1.0, atol=1e-10):
            raise InvalidArgumentError("tau grid must be symmetric about 1/2")
        object.__setattr__(self, "taus", _frozen_array(taus))

    @classmethod
    def make(cls, trim: float = 0.001, n_points: int = 999) -> "TauGrid":
        if not (0.0 < trim < 0.5):
            raise InvalidArgumentError("trim must lie in (0, 0.5)")
        if n_points < 1:
            raise InvalidArgumentError("n_points must be positive")
        if n_points == 1:
            return cls(np.array([0.5]))
        return cls(np.linspace(trim, 1.0 - trim, n_points))

    @property
    def trim(self) -> float:
        return float(self.taus[0])

    @property
    def step(self) -> float:
        if self.taus.size == 1:
            return 0.0
        return float((self.taus[-1] - self.taus[0]) / (self.taus.size - 1))

    @property
    def n_points(self) -> int:
        return self.taus.size


@dataclass(frozen=True)
class TrialGrid:
    """Candidate outcome values tested for membership in prediction sets."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise InvalidArgumentError("trial grid must be a non-empty vector")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("trial grid entries must be finite")
        if values.size > 1 and np.any(np.diff(values) <= 0.0):
            raise InvalidArgumentError("trial grid must be strictly increasing")
        object.__setattr__(self, "values", _frozen_array(values))

    @property
    def min(self) -> float:
        return float(self.values[0])

    @property
    def max(self) -> float:
        return float(self.values[-1])


def make_trial_grid(data: Dataset, n_points: int = 1000) -> TrialGrid:
    """Equally spaced grid over [-M, M] with M = max |y|.

    A zero-width outcome support cannot seed a usable grid and is rejected.
    """
    if n_points < 2:
        raise InvalidArgumentError("n_points must be at least 2")
    m = float(np.max(np.abs(data.y)))
    if m <= 0.0:
        raise InvalidArgumentError("all outcomes are zero; trial grid would be degenerate")
    return TrialGrid(np.linspace(-m, m, n_points))


@dataclass(frozen=True)
class IntervalSet:
    """A closed prediction interval, possibly degraded to an infinite hull.

    ``raw_members`` optionally records the grid points accepted by the full
    conformal search before closing to the hull.  ``infinite`` marks intervals
    that cover the whole line (calibration set too small for the level).
    """

    lower: float
    upper: float
    raw_members: np.ndarray | None = None
    infinite: bool = False
    empty: bool = field(default=False)

    def __post_init__(self):
        lower = float(self.lower)
        upper = float(self.upper)
        if self.empty:
            object.__setattr__(self, "lower", math.nan)
            object.__setattr__(self, "upper", math.nan)
            return
        if math.isnan(lower) or math.isnan(upper):
            raise InvalidArgumentError("interval endpoints must not be NaN")
        if lower > upper:
            raise InvalidArgumentError(f"lower {lower} exceeds upper {upper}")
        inf_endpoints = math.isinf(lower) or math.isinf(upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "infinite", bool(self.infinite) or inf_endpoints)
        if self.raw_members is not None:
            members = _frozen_array(self.raw_members)
            if members.size == 0:
                raise InvalidArgumentError("raw_members must be non-empty when present")
            if not (float(members.min()) == lower and float(members.max()) == upper):
                raise InvalidArgumentError("hull of raw_members must equal (lower, upper)")
            object.__setattr__(self, "raw_members", members)

    @classmethod
    def empty_set(cls) -> "IntervalSet":
        return cls(math.nan, math.nan, empty=True)

    @property
    def length(self) -> float:
        if self.empty:
            return 0.0
        return self.upper - self.lower

    def contains(self, y: float) -> bool:
        if self.empty:
            return False
        if self.infinite:
            return True
        return self.lower <= y <= self.upper


def conformal_quantile(values, alpha: float) -> float:
    """Inflated empirical quantile used to calibrate conformal thresholds.

    Returns the k-th order statistic with k = ceil((1-alpha)(n+1)); when the
    calibration set is too small (k > n) the +inf sentinel is returned and
    downstream intervals degrade to the trial-grid hull.  The 1e-9 slack in
    the ceiling absorbs the binary representation of alpha (without it,
    (1-0.1)*(99+1) lands just above 90 and the rank would come out one too
    high).
    """
    alpha = validate_alpha(alpha)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError("values must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("values must be finite")
    n = arr.size
    k = math.ceil((1.0 - alpha) * (n + 1) - 1e-9)
    if k > n:
        return math.inf
    k = max(k, 1)
    return float(np.partition(arr, k - 1)[k - 1])


def split_indices(n: int, split_frac: float, *, time_ordered: bool,
                  seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Index sets for the fitting and calibration halves of a split.

    Time-ordered data always splits contiguously; otherwise a seeded random
    split is used when a seed is given, and contiguous order when it is not.
    """
    if not (0.0 < split_frac < 1.0):
        raise InvalidArgumentError("split_frac must lie in (0, 1)")
    n0 = int(n * split_frac)
    if n0 < 1 or n - n0 < 1:
        raise InvalidArgumentError("split leaves an empty part")
    if time_ordered or seed is None:
        idx = np.arange(n)
    else:
        idx = DeterministicRng(seed, stream=1).permutation(n)
    return idx[:n0], idx[n0:]
