"""Conditional-CDF estimators: quantile-regression process, distribution
regression, and a Gaussian OLS model, plus monotone rearrangement and CDF
inversion.

All fitters canonically sort rows by (y, then x lexicographically) before
solving, so they are invariant to permutations of the training rows bit for
bit.  Fitted objects are immutable and safe to evaluate concurrently.

The quantile-regression LP is solved by iteratively reweighted least squares
with a smoothing parameter driven down to 1e-8, followed by a polish step that
enumerates interpolation subsets near the active set and certifies the result
with a subgradient check.  Correctness rests on the certificate (and on the
enumeration oracle in the test suite), not on the IRLS path.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import expit, ndtr

from .core import Dataset, TauGrid, TrialGrid
from .errors import InvalidArgumentError, NumericError, SingularDesignError
from .rng import normal_quantile

_LOGIT_CAP = 15.0


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def rearrange(values) -> np.ndarray:
    """Monotone rearrangement of a curve sampled on a grid: sort it.

    Idempotent and multiset-preserving; this is how non-monotone estimated
    CDF/quantile curves are restored to monotonicity before use.
    """
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("rearrange requires finite entries")
    return np.sort(arr)


def canonical_order(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Row order sorted by (y, then x columns lexicographically)."""
    keys = tuple(x[:, j] for j in range(x.shape[1] - 1, -1, -1)) + (y,)
    return np.lexsort(keys)


def pinball_loss(y: np.ndarray, x: np.ndarray, beta: np.ndarray, tau: float) -> float:
    """Total check-function loss of beta on (y, x)."""
    r = y - x @ beta
    return float(np.sum(np.where(r >= 0.0, tau * r, (tau - 1.0) * r)))


def _check_design(x: np.ndarray, y: np.ndarray) -> None:
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidArgumentError("non-finite entries in design or outcome")
    n, p = x.shape
    if y.shape[0] != n:
        raise InvalidArgumentError("x and y row counts differ")
    if n < p:
        raise InvalidArgumentError(f"need at least p={p} rows, got {n}")
    if np.linalg.matrix_rank(x) < p:
        raise SingularDesignError("design matrix is rank deficient")


def _with_intercept(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return np.hstack([np.ones((x.shape[0], 1)), x])


# ---------------------------------------------------------------------------
# quantile regression
# ---------------------------------------------------------------------------

def qr_subgradient_check(x, y, tau: float, beta, tol: float = 1e-8) -> bool:
    """Certify optimality: directional derivatives along +/- each coordinate
    axis must be >= -tol (scaled by the column mass)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    r = y - x @ beta
    ztol = 1e-9 * (1.0 + float(np.max(np.abs(y), initial=0.0)))
    zero = np.abs(r) <= ztol
    pos = ~zero & (r > 0.0)
    neg = ~zero & (r < 0.0)
    colpos = x[pos].sum(axis=0)
    colneg = x[neg].sum(axis=0)
    xz = x[zero]
    kink_plus = (tau * np.maximum(-xz, 0.0) + (1.0 - tau) * np.maximum(xz, 0.0)).sum(axis=0)
    kink_minus = (tau * np.maximum(xz, 0.0) + (1.0 - tau) * np.maximum(-xz, 0.0)).sum(axis=0)
    d_plus = -tau * colpos + (1.0 - tau) * colneg + kink_plus
    d_minus = tau * colpos - (1.0 - tau) * colneg + kink_minus
    tol_eff = tol * (1.0 + np.abs(x).sum(axis=0))
    return bool(np.all(d_plus >= -tol_eff) and np.all(d_minus >= -tol_eff))


def _comb_indices(n_pool: int, p: int) -> np.ndarray:
    key = (n_pool, p)
    cached = _COMB_CACHE.get(key)
    if cached is None:
        cached = np.array(list(combinations(range(n_pool), p)), dtype=np.int64)
        _COMB_CACHE[key] = cached
    return cached


_COMB_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _solve_subsets(mats: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch-solve the square interpolation systems, skipping singular ones."""
    try:
        sol = np.linalg.solve(mats, rhs[:, :, None])[:, :, 0]
        return sol, np.isfinite(sol).all(axis=1)
    except np.linalg.LinAlgError:
        pass
    k, p = rhs.shape
    sol = np.zeros((k, p))
    ok = np.zeros(k, dtype=bool)
    for i in range(k):
        try:
            sol[i] = np.linalg.solve(mats[i], rhs[i])
            ok[i] = np.all(np.isfinite(sol[i]))
        except np.linalg.LinAlgError:
            continue
    return sol, ok


def _vertex_optimal(xs: np.ndarray, ys: np.ndarray, tau: float,
                    active_rows: np.ndarray, beta: np.ndarray) -> bool | None:
    """Exact LP optimality test for an interpolating vertex.

    Solves for the subgradient multipliers of the active rows; the vertex is
    globally optimal iff they all lie in [-tau, 1-tau].  Returns None when a
    non-active row sits on the kink (degenerate tie), where the simple
    multiplier test is inconclusive.
    """
    r = ys - xs @ beta
    ztol = 1e-9 * (1.0 + float(np.max(np.abs(ys))))
    on_kink = np.abs(r) <= ztol
    on_kink[active_rows] = False
    if np.any(on_kink):
        return None
    mask = np.ones(len(ys), dtype=bool)
    mask[active_rows] = False
    pos = mask & (r > 0.0)
    neg = mask & (r < 0.0)
    g = -tau * xs[pos].sum(axis=0) + (1.0 - tau) * xs[neg].sum(axis=0)
    try:
        s = np.linalg.solve(xs[active_rows].T, -g)
    except np.linalg.LinAlgError:
        return None
    slack = 1e-7 * (1.0 + np.abs(s).max())
    return bool(np.all(s >= -tau - slack) and np.all(s <= 1.0 - tau + slack))


_MAX_POLISH_SUBSETS = 25000


def _polish_tau(xs: np.ndarray, ys: np.ndarray, tau: float, beta0: np.ndarray,
                tol: float) -> tuple[np.ndarray, float, bool]:
    """Snap an IRLS iterate to the best interpolating vertex.

    Candidate p-subsets are drawn from the rows with the smallest absolute
    residuals and enumerated in lexicographic index order (in the canonical
    row order), so ties between optimal vertices resolve deterministically to
    the smallest index set.  If the selected vertex fails the exact
    multiplier test, the pool grows (up to full enumeration for small n), so
    an IRLS iterate stranded near a coordinate-stationary but suboptimal
    vertex cannot silently win.
    """
    n, p = xs.shape
    scale = 1.0 + float(np.max(np.abs(ys)))
    res_tol = 1e-6 * scale
    perfect_tol = 1e-12 * n * scale
    r = ys - xs @ beta0
    near = np.argsort(np.abs(r), kind="stable")
    fallback = None
    extra = 6
    while True:
        pool = np.sort(near[: min(n, p + extra)])
        if math.comb(pool.size, p) > _MAX_POLISH_SUBSETS:
            break
        rows = pool[_comb_indices(pool.size, p)]        # (k, p), lex order
        sol, ok = _solve_subsets(xs[rows], ys[rows])
        fit_err = np.max(np.abs((xs[rows] @ sol[:, :, None])[:, :, 0] - ys[rows]), axis=1)
        ok &= fit_err <= res_tol
        if np.any(ok):
            bmat, rows_ok = sol[ok], rows[ok]
            # duplicate rows produce identical vertices; keep first occurrences
            _, first = np.unique(bmat, axis=0, return_index=True)
            keep = np.sort(first)
            bmat, rows_ok = bmat[keep], rows_ok[keep]
            objs = _pinball_many(xs, ys, bmat, tau)
            best = float(np.min(objs))
            cutoff = best * (1.0 + 1e-12) + 1e-12
            j = int(np.argmax(objs <= cutoff))  # first (lex-smallest) within tolerance
            fallback = (bmat[j], float(objs[j]))
            if objs[j] <= perfect_tol:
                return bmat[j], float(objs[j]), True
            verdict = _vertex_optimal(xs, ys, tau, rows_ok[j], bmat[j])
            if verdict or (verdict is None and pool.size >= n):
                beta = bmat[j]
                return beta, float(objs[j]), qr_subgradient_check(xs, ys, tau, beta, tol)
        if pool.size >= n:
            break
        extra *= 2
    if fallback is not None:
        beta, obj = fallback
        return beta, obj, qr_subgradient_check(xs, ys, tau, beta, tol)
    obj = pinball_loss(ys, xs, beta0, tau)
    return beta0, obj, qr_subgradient_check(xs, ys, tau, beta0, tol)


def _pinball_many(xs: np.ndarray, ys: np.ndarray, bmat: np.ndarray, tau: float,
                  chunk: int = 512) -> np.ndarray:
    objs = np.empty(len(bmat))
    for s in range(0, len(bmat), chunk):
        resid = ys[:, None] - xs @ bmat[s:s + chunk].T
        objs[s:s + chunk] = np.sum(np.where(resid >= 0.0, tau * resid,
                                            (tau - 1.0) * resid), axis=0)
    return objs


def _fit_qr_batch(x: np.ndarray, y: np.ndarray, taus: np.ndarray,
                  tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fit the check-loss minimizer for every tau at once.

    The IRLS stage shares work across the tau grid (one batched weighted
    least-squares solve per iteration); the polish stage runs per tau.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    _check_design(x, y)
    taus = np.asarray(taus, dtype=np.float64)
    if np.any((taus <= 0.0) | (taus >= 1.0)):
        raise InvalidArgumentError("tau must lie strictly in (0, 1)")

    order = canonical_order(y, x)
    xs, ys = x[order], y[order]
    n, p = xs.shape
    m = taus.size

    beta0, *_ = np.linalg.lstsq(xs, ys, rcond=None)
    bmat = np.tile(beta0, (m, 1))
    eye = np.eye(p)
    scale = 1.0 + float(np.max(np.abs(ys)))
    # flattened outer products let the weighted normal equations assemble as
    # two BLAS matmuls per iteration instead of a naive einsum
    xx = (xs[:, :, None] * xs[:, None, :]).reshape(n, p * p)
    xy = xs * ys[:, None]

    for eps in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8):
        for _ in range(15):
            resid = ys[:, None] - xs @ bmat.T                      # (n, m)
            asym = np.where(resid >= 0.0, taus, 1.0 - taus)
            w = asym / np.maximum(np.abs(resid), eps)
            lhs = (xx.T @ w).T.reshape(m, p, p)
            lhs += (1e-11 * np.trace(lhs, axis1=1, axis2=2) / p)[:, None, None] * eye
            rhs = (xy.T @ w).T
            try:
                new = np.linalg.solve(lhs, rhs[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError as exc:
                raise NumericError("weighted least-squares step failed") from exc
            delta = float(np.max(np.abs(new - bmat)))
            bmat = new
            if delta < 0.25 * eps * scale:
                break

    betas = np.empty_like(bmat)
    objs = np.empty(m)
    certs = np.empty(m, dtype=bool)
    for j, tau in enumerate(taus):
        betas[j], objs[j], certs[j] = _polish_tau(xs, ys, float(tau), bmat[j], tol)
    return betas, objs, certs


def fit_qr(x, y, tau: float, tol: float = 1e-8) -> np.ndarray:
    """Minimize the check loss sum_t rho_tau(y_t - x_t'beta).

    Returns the coefficient vector; optimality is certified by the coordinate
    subgradient check (see :func:`qr_subgradient_check`).  Among optimal
    vertices, the one interpolating the lexicographically smallest index set
    (after canonical row sorting) is returned, which makes the fit a pure,
    permutation-invariant function of the data multiset.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    tau = float(tau)
    if not (0.0 < tau < 1.0):
        raise InvalidArgumentError("tau must lie strictly in (0, 1)")
    betas, _, _ = _fit_qr_batch(x, y, np.array([tau]), tol)
    return betas[0]


@dataclass(frozen=True)
class QrFit:
    """Quantile-regression process: one coefficient row per grid level."""

    tau_grid: TauGrid
    betas: np.ndarray              # (n_taus, p)
    objective_values: np.ndarray   # per-tau pinball objective
    certified: np.ndarray          # per-tau subgradient certificate

    def __post_init__(self):
        if self.betas.shape[0] != self.tau_grid.n_points:
            raise InvalidArgumentError("betas rows must match tau grid size")

    @property
    def n_features(self) -> int:
        return self.betas.shape[1]


def fit_qr_process(data: Dataset, grid: TauGrid, tol: float = 1e-8) -> QrFit:
    """Fit the whole quantile process on one dataset."""
    betas, objs, certs = _fit_qr_batch(data.x, data.y, grid.taus, tol)
    return QrFit(grid, betas, objs, certs)


# ---------------------------------------------------------------------------
# CDF model interface
# ---------------------------------------------------------------------------

class CdfModel(ABC):
    """A fitted conditional CDF: answers F(y, x) and its inverse.

    ``cdf_values`` must be nondecreasing in y for any fixed x (the concrete
    models guarantee this by monotone rearrangement), with range inside
    [0, 1].  ``quantile_values`` is the generalized inverse
    inf{y : F(y, x) >= tau}, with one boundary convention: levels at or below
    ``rank_floor`` (the limiting CDF value as y -> -inf, positive for
    trimmed-grid models) map to the fitted support edge rather than -inf,
    mirroring lim tau->0 of the quantile curve.  Without this, any rank band
    touching the floor would invert to an unbounded set purely because the
    trimmed CDF is constant below the smallest fitted quantile.
    """

    add_intercept: bool = False

    @property
    def rank_floor(self) -> float:
        """Limiting CDF value as y -> -inf (0 unless the model trims ranks)."""
        return 0.0

    def _design_row(self, x) -> np.ndarray:
        vec = np.asarray(x, dtype=np.float64).ravel()
        if self.add_intercept:
            vec = np.concatenate([[1.0], vec])
        return vec

    def _design(self, xs) -> np.ndarray:
        mat = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        if self.add_intercept:
            mat = _with_intercept(mat)
        return mat

    @abstractmethod
    def cdf_values(self, x, ys) -> np.ndarray:
        """F(y, x) for one predictor vector and many outcome values."""

    @abstractmethod
    def quantile_values(self, x, taus) -> np.ndarray:
        """inf{y : F(y, x) >= tau} for one predictor vector and many levels."""

    def cdf(self, x, y: float) -> float:
        return float(self.cdf_values(x, np.array([y]))[0])

    def quantile(self, x, tau: float) -> float:
        return float(self.quantile_values(x, np.array([tau]))[0])

    def cdf_at(self, xs, ys) -> np.ndarray:
        """Paired evaluation F(y_i, x_i); default loops, models vectorize."""
        ys = np.asarray(ys, dtype=np.float64)
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        return np.array([self.cdf(xs[i], ys[i]) for i in range(len(ys))])

    def quantile_matrix(self, xs, taus) -> np.ndarray:
        """Quantiles for many predictor rows at shared levels; default loops."""
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        return np.vstack([self.quantile_values(xs[i], taus) for i in range(xs.shape[0])])


class QrCdfModel(CdfModel):
    """CDF implied by a quantile process: trim + step * #{tau : x'b(tau) <= y},
    with the fitted curve rearranged (sorted) before thresholding.

    Quantiles at levels outside the tau grid extrapolate to the nearest fitted
    curve value (the process cannot speak about ranks beyond its trim)."""

    def __init__(self, fit: QrFit, add_intercept: bool = False):
        self.fit = fit
        self.add_intercept = add_intercept

    @property
    def rank_floor(self) -> float:
        return self.fit.tau_grid.trim

    def _check_dim(self, d: np.ndarray):
        if d.shape[-1] != self.fit.n_features:
            raise InvalidArgumentError(
                f"predictor has {d.shape[-1]} entries, model expects {self.fit.n_features}")

    def _curve(self, x) -> np.ndarray:
        d = self._design_row(x)
        self._check_dim(d)
        return np.sort(self.fit.betas @ d)

    def _curves(self, xs) -> np.ndarray:
        d = self._design(xs)
        self._check_dim(d)
        return np.sort(d @ self.fit.betas.T, axis=1)

    def cdf_values(self, x, ys) -> np.ndarray:
        curve = self._curve(x)
        counts = np.searchsorted(curve, np.asarray(ys, dtype=np.float64), side="right")
        grid = self.fit.tau_grid
        return np.clip(grid.trim + grid.step * counts, 0.0, 1.0)

    def cdf_at(self, xs, ys) -> np.ndarray:
        curves = self._curves(xs)
        ys = np.asarray(ys, dtype=np.float64)
        counts = (curves <= ys[:, None]).sum(axis=1)
        grid = self.fit.tau_grid
        return np.clip(grid.trim + grid.step * counts, 0.0, 1.0)

    def _tau_ranks(self, taus) -> np.ndarray:
        grid = self.fit.tau_grid
        taus = np.asarray(taus, dtype=np.float64)
        if grid.step == 0.0:
            return np.where(taus <= grid.trim, 1, grid.n_points + 1)
        return np.ceil((taus - grid.trim) / grid.step - 1e-9).astype(np.int64)

    def quantile_values(self, x, taus) -> np.ndarray:
        curve = self._curve(x)
        k = self._tau_ranks(taus)
        return curve[np.clip(k - 1, 0, curve.size - 1)]

    def quantile_matrix(self, xs, taus) -> np.ndarray:
        curves = self._curves(xs)
        k = self._tau_ranks(taus)
        return curves[:, np.clip(k - 1, 0, curves.shape[1] - 1)]


def qr_cdf(fit: QrFit, x, y: float) -> float:
    """Implied conditional CDF of a fitted quantile process at (y, x)."""
    return QrCdfModel(fit).cdf(x, y)


# ---------------------------------------------------------------------------
# distribution regression
# ---------------------------------------------------------------------------

def _glm_mu_weight(eta: np.ndarray, link: str):
    if link == "logit":
        mu = expit(eta)
        return mu, mu * (1.0 - mu), None
    # probit: Fisher scoring weights phi^2 / (P (1-P))
    pdf = np.exp(-0.5 * eta * eta) / math.sqrt(2.0 * math.pi)
    prob = np.clip(ndtr(eta), 1e-12, 1.0 - 1e-12)
    return prob, pdf * pdf / (prob * (1.0 - prob)), pdf


def _glm_negloglik(design, labels, beta, ridge, link):
    eta = design @ beta
    if link == "logit":
        ll = labels * -np.logaddexp(0.0, -eta) + (1.0 - labels) * -np.logaddexp(0.0, eta)
    else:
        prob = np.clip(ndtr(eta), 1e-300, 1.0 - 1e-16)
        ll = labels * np.log(prob) + (1.0 - labels) * np.log1p(-prob)
    return -float(np.mean(ll)) + 0.5 * ridge * float(beta @ beta)


def newton_glm(design: np.ndarray, labels: np.ndarray, *, ridge: float,
               link: str = "logit", max_iter: int = 100,
               tol: float = 1e-8) -> tuple[np.ndarray, bool]:
    """Damped Newton / Fisher scoring for a ridge-penalized binary GLM.

    The ridge applies to the mean log-likelihood, so the fit is invariant to
    duplicating every row.  Returns (beta, converged) where convergence means
    the penalized gradient infinity-norm dropped below ``tol``.
    """
    n, p = design.shape
    beta = np.zeros(p)
    eye = np.eye(p)
    converged = False
    for _ in range(max_iter):
        eta = design @ beta
        mu, w, pdf = _glm_mu_weight(eta, link)
        if link == "logit":
            grad = design.T @ (mu - labels) / n + ridge * beta
        else:
            prob = np.clip(mu, 1e-12, 1.0 - 1e-12)
            grad = design.T @ (-(labels - prob) * pdf / (prob * (1.0 - prob))) / n + ridge * beta
        if float(np.max(np.abs(grad))) < tol:
            converged = True
            break
        hess = design.T @ (w[:, None] * design) / n + ridge * eye
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericError("GLM Hessian solve failed") from exc
        f0 = _glm_negloglik(design, labels, beta, ridge, link)
        lam = 1.0
        cand = beta - step
        for _ in range(30):
            cand = beta - lam * step
            if _glm_negloglik(design, labels, cand, ridge, link) < f0:
                break
            lam *= 0.5
        beta = cand
    else:
        eta = design @ beta
        mu, _, pdf = _glm_mu_weight(eta, link)
        if link == "logit":
            grad = design.T @ (mu - labels) / n + ridge * beta
        else:
            prob = np.clip(mu, 1e-12, 1.0 - 1e-12)
            grad = design.T @ (-(labels - prob) * pdf / (prob * (1.0 - prob))) / n + ridge * beta
        converged = float(np.max(np.abs(grad))) < tol
    return beta, converged


@dataclass(frozen=True)
class DrFit:
    """Per-threshold binary-regression coefficients for the conditional CDF.

    Thresholds where the fit is degenerate (an empty class, or complete
    separation detected through non-convergence) carry a constant
    capped-logit level instead of coefficients; they are flagged, not fatal,
    and the rearrangement downstream absorbs the distortion.
    """

    threshold_grid: np.ndarray       # strictly increasing y thresholds
    betas: np.ndarray                # (n_thresholds, p)
    link: str
    converged: np.ndarray            # bool per threshold
    degenerate: np.ndarray           # bool per threshold
    const_logit: np.ndarray          # capped logit level for degenerate rows

    @property
    def n_features(self) -> int:
        return self.betas.shape[1]


def default_dr_thresholds(y, n_levels: int = 99) -> np.ndarray:
    """Empirical quantiles of y at equally spaced levels (duplicates merged)."""
    levels = np.linspace(0.01, 0.99, n_levels)
    return np.unique(np.quantile(np.asarray(y, dtype=np.float64), levels))


def fit_dr(data: Dataset, thresholds, link: str = "logit",
           ridge: float = 1e-6, tol: float = 1e-8) -> DrFit:
    """Fit one binary regression of 1{y <= threshold} per threshold."""
    if link not in ("logit", "probit"):
        raise InvalidArgumentError(f"unknown link {link!r}")
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if thresholds.ndim != 1 or thresholds.size == 0:
        raise InvalidArgumentError("thresholds must be a non-empty vector")
    if not np.all(np.isfinite(thresholds)):
        raise InvalidArgumentError("thresholds must be finite")
    if thresholds.size > 1 and np.any(np.diff(thresholds) <= 0.0):
        raise InvalidArgumentError("thresholds must be strictly increasing")
    _check_design(data.x, data.y)

    order = canonical_order(data.y, data.x)
    xs, ys = data.x[order], data.y[order]
    n, p = xs.shape
    k = thresholds.size
    betas = np.zeros((k, p))
    converged = np.zeros(k, dtype=bool)
    degenerate = np.zeros(k, dtype=bool)
    const_logit = np.zeros(k)

    for i, thr in enumerate(thresholds):
        labels = (ys <= thr).astype(np.float64)
        share = float(labels.mean())
        if share <= 0.0 or share >= 1.0:
            degenerate[i] = True
            const_logit[i] = _LOGIT_CAP if share >= 1.0 else -_LOGIT_CAP
            continue
        beta, ok = newton_glm(xs, labels, ridge=ridge, link=link, tol=tol)
        if not ok:
            # treat as separation: fall back to the capped intercept-only fit
            degenerate[i] = True
            const_logit[i] = float(np.clip(math.log(share / (1.0 - share)),
                                           -_LOGIT_CAP, _LOGIT_CAP))
            continue
        betas[i] = beta
        converged[i] = True
    return DrFit(thresholds, betas, link, converged, degenerate, const_logit)


class DrCdfModel(CdfModel):
    """Step-function conditional CDF from distribution regression.

    Link values across thresholds are rearranged (sorted), then the CDF is
    piecewise constant in y: 0 below the first threshold, the value at the
    last threshold above it, exact link values at grid hits.
    """

    def __init__(self, fit: DrFit, add_intercept: bool = False):
        self.fit = fit
        self.add_intercept = add_intercept

    def _levels(self, x) -> np.ndarray:
        d = self._design_row(x)
        if d.size != self.fit.n_features:
            raise InvalidArgumentError(
                f"predictor has {d.size} entries, model expects {self.fit.n_features}")
        eta = self.fit.betas @ d
        vals = expit(eta) if self.fit.link == "logit" else ndtr(eta)
        if np.any(self.fit.degenerate):
            vals = np.where(self.fit.degenerate, expit(self.fit.const_logit), vals)
        return np.sort(vals)

    def cdf_values(self, x, ys) -> np.ndarray:
        levels = self._levels(x)
        idx = np.searchsorted(self.fit.threshold_grid, np.asarray(ys, dtype=np.float64),
                              side="right") - 1
        out = levels[np.clip(idx, 0, levels.size - 1)]
        return np.where(idx < 0, 0.0, out)

    def quantile_values(self, x, taus) -> np.ndarray:
        levels = self._levels(x)
        taus = np.asarray(taus, dtype=np.float64)
        j = np.searchsorted(levels, taus, side="left")
        out = self.fit.threshold_grid[np.clip(j, 0, levels.size - 1)]
        # above the top fitted level the CDF never reaches tau; at or below
        # zero the support edge (first threshold) is the limiting quantile
        out = np.where(j >= levels.size, np.inf, out)
        return np.where(taus <= 0.0, self.fit.threshold_grid[0], out)


def dr_cdf(fit: DrFit, x, y: float) -> float:
    """Conditional CDF of a fitted distribution regression at (y, x)."""
    return DrCdfModel(fit).cdf(x, y)


# ---------------------------------------------------------------------------
# OLS and the Gaussian CDF model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OlsFit:
    """Least-squares mean fit, with an optional absolute-residual scale fit."""

    beta: np.ndarray
    residual_sd: float
    scale_beta: np.ndarray | None = None


def fit_ols(data: Dataset, fit_scale: bool = False) -> OlsFit:
    """Solve the normal equations; residual_sd is the RMS residual floored at
    1e-6.  With ``fit_scale``, |residual| is regressed on x for use as a local
    variability measure (predictions floored at 1e-6 by the consumers)."""
    _check_design(data.x, data.y)
    order = canonical_order(data.y, data.x)
    xs, ys = data.x[order], data.y[order]
    beta, *_ = np.linalg.lstsq(xs, ys, rcond=None)
    resid = ys - xs @ beta
    sd = max(float(np.sqrt(np.mean(resid ** 2))), 1e-6)
    scale_beta = None
    if fit_scale:
        scale_beta, *_ = np.linalg.lstsq(xs, np.abs(resid), rcond=None)
    return OlsFit(beta, sd, scale_beta)


class GaussianCdfModel(CdfModel):
    """Gaussian conditional CDF around a linear mean: F(y, x) = Phi((y - x'b) / s)."""

    def __init__(self, beta: np.ndarray, sd: float, add_intercept: bool = False):
        self.beta = np.asarray(beta, dtype=np.float64)
        self.sd = float(sd)
        if self.sd <= 0.0:
            raise InvalidArgumentError("sd must be positive")
        self.add_intercept = add_intercept

    def _mean(self, x) -> float:
        d = self._design_row(x)
        if d.size != self.beta.size:
            raise InvalidArgumentError("predictor dimension mismatch")
        return float(d @ self.beta)

    def cdf_values(self, x, ys) -> np.ndarray:
        mu = self._mean(x)
        return ndtr((np.asarray(ys, dtype=np.float64) - mu) / self.sd)

    def cdf_at(self, xs, ys) -> np.ndarray:
        mu = self._design(xs) @ self.beta
        return ndtr((np.asarray(ys, dtype=np.float64) - mu) / self.sd)

    def quantile_values(self, x, taus) -> np.ndarray:
        mu = self._mean(x)
        return mu + self.sd * normal_quantile(np.asarray(taus, dtype=np.float64))

    def quantile_matrix(self, xs, taus) -> np.ndarray:
        mu = self._design(xs) @ self.beta
        z = self.sd * normal_quantile(np.asarray(taus, dtype=np.float64))
        return mu[:, None] + z[None, :]


# ---------------------------------------------------------------------------
# inversion on a trial grid
# ---------------------------------------------------------------------------

def invert_cdf(model: CdfModel, x, tau: float, grid: TrialGrid,
               return_flag: bool = False):
    """Smallest grid value y with F(y, x) >= tau.

    If the CDF never reaches tau on the grid, the grid maximum is returned
    with the saturation flag set.  tau may be 0 or 1 (the interval-building
    formulas clamp into [0, 1]).  Levels at or below the model's rank floor
    invert to the first grid point past the floor plateau (the fitted
    support edge) instead of the grid minimum; see :class:`CdfModel`.
    """
    tau = float(tau)
    if not (0.0 <= tau <= 1.0):
        raise InvalidArgumentError("tau must lie in [0, 1]")
    fvals = model.cdf_values(x, grid.values)
    floor = model.rank_floor
    if tau <= floor:
        idx = int(np.searchsorted(fvals, floor, side="right"))
    else:
        idx = int(np.searchsorted(fvals, tau, side="left"))
    saturated = idx >= grid.values.size
    y = grid.max if saturated else float(grid.values[idx])
    if return_flag:
        return y, saturated
    return y


def invert_cdf_upper(model: CdfModel, x, tau: float, grid: TrialGrid) -> float:
    """Largest grid value y with F(y, x) <= tau: the sup of a rank band.

    For a step CDF this differs from :func:`invert_cdf` at exactly-attained
    levels: the conforming region {y : F(y, x) <= tau} runs to the end of the
    F == tau step, and returning its start would silently drop one
    quantile-curve step of probability mass from every interval whose
    calibrated threshold is attained by a fitted rank.
    """
    tau = float(tau)
    if not (0.0 <= tau <= 1.0):
        raise InvalidArgumentError("tau must lie in [0, 1]")
    fvals = model.cdf_values(x, grid.values)
    idx = int(np.searchsorted(fvals, tau, side="right")) - 1
    if idx < 0:
        return grid.min
    return float(grid.values[idx])


# ---------------------------------------------------------------------------
# estimator configuration (the permutation-invariant refit recipe)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimatorConfig:
    """Recipe for fitting a conditional-CDF model from raw arrays.

    ``add_intercept`` controls whether a constant column is prepended to the
    design before fitting; the fitted model applies the same transform when
    evaluated at new predictor vectors.
    """

    kind: str = "qr"  # qr | dr | ols
    tau_grid: TauGrid = field(default_factory=TauGrid.make)
    dr_levels: int = 99
    link: str = "logit"
    add_intercept: bool = False

    def __post_init__(self):
        if self.kind not in ("qr", "dr", "ols"):
            raise InvalidArgumentError(f"unknown estimator kind {self.kind!r}")

    def fit(self, y, x) -> CdfModel:
        y = np.asarray(y, dtype=np.float64)
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        design = _with_intercept(x) if self.add_intercept else x
        data = Dataset(y, design)
        if self.kind == "qr":
            return QrCdfModel(fit_qr_process(data, self.tau_grid), self.add_intercept)
        if self.kind == "dr":
            thresholds = default_dr_thresholds(y, self.dr_levels)
            return DrCdfModel(fit_dr(data, thresholds, self.link), self.add_intercept)
        ols = fit_ols(data, fit_scale=False)
        return GaussianCdfModel(ols.beta, ols.residual_sd, self.add_intercept)
