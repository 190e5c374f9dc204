"""Deterministic random number generation and normal special functions.

Randomness everywhere in this package flows through :class:`DeterministicRng`,
a counter-based generator built on the splitmix64 finalizer.  Each draw is a
pure function of (seed, stream, counter), so runs are reproducible bit for bit
and independent streams can be derived for parallel use without coordination.

Normal variates are produced by applying the inverse normal CDF to uniforms.
The inverse CDF is Wichura's PPND16 rational approximation (Algorithm AS 241),
implemented here in full double precision so that reruns of the same seed in
any language reproduce the same stream to well below 1e-12.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from .errors import InvalidArgumentError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64_int(z: int) -> int:
    """splitmix64 finalizer on a Python int, modulo 2**64."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


class DeterministicRng:
    """Counter-based splitmix64 stream.

    Parameters
    ----------
    seed : int
        Base seed; any Python integer (reduced modulo 2**64).
    stream : int
        Stream identifier.  Streams with the same seed but different ids are
        statistically independent, enabling per-task substreams.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._key = _mix64_int((self.seed & _MASK64) ^ _mix64_int((self.stream + _GOLDEN) & _MASK64))
        self._counter = 0

    def spawn(self, stream: int) -> "DeterministicRng":
        """Derive an independent stream from the same base seed."""
        return DeterministicRng(self.seed, (self.stream << 8) ^ stream ^ 0x5A)

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles, uniform on (0, 1), each strictly inside the interval."""
        if n < 0:
            raise InvalidArgumentError("n must be nonnegative")
        idx = np.arange(self._counter, self._counter + n, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            z = _mix64_array((np.uint64(self._key) + (idx + np.uint64(1)) * np.uint64(_GOLDEN)))
        # 53-bit mantissa, then a half-ulp offset keeps 0 out of the support.
        return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54

    def normals(self, n: int) -> np.ndarray:
        """n standard normal draws via the inverse-CDF transform."""
        return normal_quantile(self.uniforms(n))

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) (argsort of fresh uniforms)."""
        return np.argsort(self.uniforms(n), kind="stable")

    def integers(self, n: int, high: int) -> np.ndarray:
        """n integers uniform on {0, ..., high-1} (used for small index draws)."""
        if high <= 0:
            raise InvalidArgumentError("high must be positive")
        return np.minimum((self.uniforms(n) * high).astype(np.int64), high - 1)


# --- AS 241 (PPND16) coefficients -----------------------------------------

_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coeffs, r):
    acc = np.full_like(r, coeffs[-1])
    for c in coeffs[-2::-1]:
        acc = acc * r + c
    return acc


def normal_quantile(p):
    """Inverse standard normal CDF (Wichura AS 241, double precision).

    Accepts scalars or arrays with entries in [0, 1]; endpoints map to
    -inf/+inf.
    """
    p_arr = np.asarray(p, dtype=np.float64)
    scalar = p_arr.ndim == 0
    p_arr = np.atleast_1d(p_arr)
    if np.any((p_arr < 0.0) | (p_arr > 1.0) | ~np.isfinite(p_arr)):
        raise InvalidArgumentError("probabilities must lie in [0, 1]")
    q = p_arr - 0.5
    out = np.empty_like(p_arr)

    central = np.abs(q) <= 0.425
    if np.any(central):
        r = 0.180625 - q[central] * q[central]
        out[central] = q[central] * _poly(_A, r) / _poly(_B, r)

    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.where(qt < 0.0, p_arr[tail], 1.0 - p_arr[tail])
        with np.errstate(divide="ignore"):
            r = np.sqrt(-np.log(r))
        val = np.empty_like(r)
        near = r <= 5.0
        rn = r[near] - 1.6
        val[near] = _poly(_C, rn) / _poly(_D, rn)
        far = ~near
        rf = r[far] - 5.0
        with np.errstate(invalid="ignore"):
            val[far] = _poly(_E, rf) / _poly(_F, rf)
        val[np.isinf(r)] = np.inf
        out[tail] = np.where(qt < 0.0, -val, val)

    return float(out[0]) if scalar else out


def normal_cdf(z):
    """Standard normal CDF (scipy's ndtr; vectorized, deterministic)."""
    res = ndtr(np.asarray(z, dtype=np.float64))
    return float(res) if np.ndim(z) == 0 else res
