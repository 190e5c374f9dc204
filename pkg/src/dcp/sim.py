"""Data-generating processes and their analytic oracle intervals.

Three seeded processes drive the simulation studies: a uniform location-scale
model (heteroskedastic, symmetric), a scaled-exponential model (skewed, where
the shape adjustment pays off), and a volatility-clustering returns process
for time-series evaluation.  The oracles give the population intervals the
estimated methods should approach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, IntervalSet, validate_alpha
from .errors import InvalidArgumentError
from .rng import DeterministicRng, normal_cdf, normal_quantile

DGP_KINDS = ("location_scale", "skewed_exponential", "ar_garch_like")

_GARCH_DEFAULTS = {"omega": 0.05, "arch": 0.1, "garch": 0.85,
                   "window": 22, "burn_in": 100}


@dataclass(frozen=True)
class Dgp:
    """A named data-generating process with a seed; identical (kind, params,
    seed) produce bit-identical datasets."""

    kind: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DGP_KINDS:
            raise InvalidArgumentError(
                f"unknown dgp {self.kind!r}; expected one of {DGP_KINDS}")


def generate(dgp: Dgp, t: int) -> Dataset:
    """Draw a dataset of length t from the process.

    location_scale:      X ~ U(0,1), eps ~ N(0,1), Y = X + X*eps
    skewed_exponential:  X ~ U(0.5,1.5), Y | X ~ X * Exp(1)
    ar_garch_like:       volatility-clustered returns; the predictor is the
                         lagged 22-day realized volatility of the simulated
                         return series, so rows are ready for the rolling
                         protocol.
    """
    if t < 1:
        raise InvalidArgumentError("t must be positive")
    rng = DeterministicRng(dgp.seed)
    if dgp.kind == "location_scale":
        xs = rng.uniforms(t)
        eps = normal_quantile(rng.uniforms(t))
        return Dataset(xs + xs * eps, xs[:, None], time_ordered=False)
    if dgp.kind == "skewed_exponential":
        xs = 0.5 + rng.uniforms(t)
        exp_draws = -np.log1p(-rng.uniforms(t))
        return Dataset(xs * exp_draws, xs[:, None], time_ordered=False)
    params = {**_GARCH_DEFAULTS, **dgp.params}
    window = int(params["window"])
    burn = int(params["burn_in"])
    omega, arch, garch = params["omega"], params["arch"], params["garch"]
    n_total = t + window + burn
    eps = normal_quantile(rng.uniforms(n_total))
    returns = np.empty(n_total)
    var = omega / (1.0 - arch - garch)  # stationary variance start
    for i in range(n_total):
        r = math.sqrt(var) * eps[i]
        returns[i] = r
        var = omega + arch * r * r + garch * var
    returns = returns[burn:]
    rv = realized_volatility(returns, window)
    rows = slice(window, window + t)
    return Dataset(returns[rows], rv[rows][:, None], time_ordered=True)


def realized_volatility(returns, window: int = 22) -> np.ndarray:
    """Square root of the rolling sum of squared returns over the past window.

    Entry t uses returns t-window .. t-1 only, so the series is already the
    lagged predictor; the first ``window`` entries are NaN (missing).
    """
    r = np.asarray(returns, dtype=np.float64)
    if r.ndim != 1:
        raise InvalidArgumentError("returns must be a vector")
    if r.size < window + 1:
        raise InvalidArgumentError(f"need at least window+1={window + 1} returns")
    csum = np.concatenate([[0.0], np.cumsum(r * r)])
    out = np.full(r.size, np.nan)
    out[window:] = np.sqrt(np.maximum(csum[window:-1] - csum[:-window - 1], 0.0))
    return out


# ---------------------------------------------------------------------------
# analytic oracles for the location-scale model
# ---------------------------------------------------------------------------

def oracle_dcp_interval(x: float, alpha: float) -> IntervalSet:
    """Population rank-based interval for Y = X + X*eps: [x(1-q), x(1+q)] with
    q the (1-alpha/2) normal quantile.  Conditionally valid at every x."""
    alpha = validate_alpha(alpha)
    q = normal_quantile(1.0 - alpha / 2.0)
    return IntervalSet(x - x * q, x + x * q)


_QR_CACHE: dict[float, float] = {}
_GL_NODES = 256


def oracle_mean_halfwidth(alpha: float) -> float:
    """Half-width q solving E_X[2 Phi(q/X) - 1] = 1 - alpha for X ~ U(0,1).

    Solved once per alpha by bisection over a Gauss-Legendre quadrature in X
    (tolerance well below 1e-6); cached.
    """
    alpha = validate_alpha(alpha)
    key = round(alpha, 12)
    if key in _QR_CACHE:
        return _QR_CACHE[key]
    nodes, weights = np.polynomial.legendre.leggauss(_GL_NODES)
    xs = 0.5 * (nodes + 1.0)          # map to (0, 1)
    ws = 0.5 * weights

    def coverage(q: float) -> float:
        return float(np.sum(ws * (2.0 * normal_cdf(q / xs) - 1.0)))

    lo, hi = 1e-12, 1.0
    while coverage(hi) < 1.0 - alpha:
        hi *= 2.0
        if hi > 1e6:
            raise InvalidArgumentError("mean-interval half-width did not bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if coverage(mid) < 1.0 - alpha:
            lo = mid
        else:
            hi = mid
    _QR_CACHE[key] = 0.5 * (lo + hi)
    return _QR_CACHE[key]


def oracle_mean_interval(x: float, alpha: float) -> IntervalSet:
    """Population mean-based interval [x - q, x + q]; its length is the same
    constant 2q for every x, which is exactly why it is not conditionally
    valid under heteroskedasticity."""
    q = oracle_mean_halfwidth(alpha)
    return IntervalSet(x - q, x + q)


def oracle_mean_conditional_coverage(x, alpha: float):
    """Conditional coverage 2 Phi(q/x) - 1 of the mean-based oracle interval:
    above 1-alpha for small x, below it as x approaches 1."""
    q = oracle_mean_halfwidth(alpha)
    return 2.0 * normal_cdf(q / np.asarray(x, dtype=np.float64)) - 1.0
