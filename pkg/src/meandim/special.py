"""Normal and chi-square quantiles for the unit-cube transforms.

The regularized incomplete gamma functions come from :mod:`scipy.special`;
the quantile solvers on top of them are local so their accuracy contract
(:class:`ToleranceProfile`) is explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp


@dataclass(frozen=True)
class ToleranceProfile:
    abs_cdf_roundtrip: float = 1e-10
    max_newton_iters: int = 64

    def __post_init__(self):
        if not self.abs_cdf_roundtrip > 0:
            raise ValueError("abs_cdf_roundtrip must be positive")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")


DEFAULT_TOLERANCE = ToleranceProfile()


class QuantileConvergenceError(ArithmeticError):
    """Newton iteration did not meet the tolerance profile.

    ``last_iterate`` holds the final iterate (same shape as the input).
    """

    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


def _check_open_unit(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any(~(u > 0.0) | ~(u < 1.0)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    return u


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


# Acklam's rational approximation, relative error below 1.2e-9
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _lower_half_quantile(p):
    """Quantile for ``0 < p <= 0.5``; returns values <= 0."""
    x = np.empty_like(p)
    tail = p < _P_LOW
    if tail.any():
        q = np.sqrt(-2.0 * np.log(p[tail]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[tail] = num / den
    mid = ~tail
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num / den
    # one Halley step against erfc; the density is folded into a log so
    # the step stays finite deep in the tail
    cdf = 0.5 * sp.erfc(-x / math.sqrt(2.0))
    ratio = np.exp(np.log(p) + 0.5 * x * x + _LOG_SQRT_2PI)
    step = (cdf / p - 1.0) * ratio
    x = x - step / (1.0 + 0.5 * x * step)
    return np.where(p == 0.5, 0.0, x)


def normal_quantile(u):
    """Standard normal quantile, vectorized over ``u`` in (0, 1)."""
    u = _check_open_unit(u)
    flat = np.atleast_1d(u)
    lower = flat <= 0.5
    p = np.where(lower, flat, 1.0 - flat)
    x = _lower_half_quantile(p)
    x = np.where(lower, x, -x).reshape(u.shape)
    return _scalar_or_array(x, u)


def normal_cdf(x):
    x = np.asarray(x, dtype=np.float64)
    return _scalar_or_array(0.5 * sp.erfc(-x / math.sqrt(2.0)), x)


def gamma_p(a, x):
    """Regularized lower incomplete gamma P(a, x)."""
    if np.any(np.asarray(a) <= 0):
        raise ValueError("shape a must be positive")
    if np.any(np.asarray(x) < 0):
        raise ValueError("x must be nonnegative")
    out = sp.gammainc(a, x)
    return _scalar_or_array(out, np.broadcast_arrays(a, x)[0])


def gamma_q(a, x):
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if np.any(np.asarray(a) <= 0):
        raise ValueError("shape a must be positive")
    out = sp.gammaincc(a, x)
    return _scalar_or_array(out, np.broadcast_arrays(a, x)[0])


def chisq_cdf(df, q):
    return gamma_p(np.asarray(df) / 2.0, np.asarray(q) / 2.0)


def _initial_gamma_guess(a, u, z):
    upper = u > 0.5
    if a == 0.5:
        # chi-square(1) is a squared normal: P(1/2, x) = erf(sqrt(x))
        r = np.where(upper, sp.erfcinv(np.where(upper, 1.0 - u, 1.0)), sp.erfinv(np.where(upper, 0.0, u)))
        return r * r
    if a == 1.0:
        return np.where(upper, -np.log(np.where(upper, 1.0 - u, 1.0)), -np.log1p(-np.where(upper, 0.0, u)))
    if a > 1.0:
        # Wilson-Hilferty cube on the chi-square scale, halved
        df = 2.0 * a
        h = 2.0 / (9.0 * df)
        x = 0.5 * df * np.maximum(1.0 - h + z * math.sqrt(h), 0.0) ** 3
        small = x < 1e-3 * a
        if small.any():
            x[small] = np.exp((np.log(u[small]) + sp.gammaln(a + 1.0)) / a)
        return x
    t = 1.0 - a * (0.253 + a * 0.12)
    lower = u < t
    x = np.empty_like(u)
    x[lower] = (u[lower] / t) ** (1.0 / a)
    x[~lower] = 1.0 - np.log((1.0 - u[~lower]) / (1.0 - t))
    return x


def _tail_residual(a, x, tail, upper):
    # P(a, x) - u on the lower side, (1 - u) - Q(a, x) on the upper side
    resid = np.empty_like(x)
    lo = ~upper
    if a == 0.5:
        resid[lo] = sp.erf(np.sqrt(x[lo])) - tail[lo]
        resid[upper] = tail[upper] - sp.erfc(np.sqrt(x[upper]))
    else:
        resid[lo] = sp.gammainc(a, x[lo]) - tail[lo]
        resid[upper] = tail[upper] - sp.gammaincc(a, x[upper])
    return resid


def chisq_quantile(df, u, profile: ToleranceProfile = DEFAULT_TOLERANCE):
    """Chi-square quantile with ``df`` degrees of freedom.

    Initial guess from the Wilson--Hilferty cube (closed forms for df 1
    and 2, a small-shape series guess for df < 2 or deep lower tails), then Halley-corrected Newton
    steps on ``gamma_p``. Residuals are taken in whichever tail is
    smaller so upper quantiles keep full relative accuracy.
    """
    if not df > 0:
        raise ValueError("df must be positive")
    u = _check_open_unit(u)
    flat = np.atleast_1d(u).astype(np.float64).ravel()
    a = 0.5 * float(df)
    upper = flat > 0.5
    tail = np.where(upper, 1.0 - flat, flat)
    z = np.atleast_1d(normal_quantile(flat))
    x = _initial_gamma_guess(a, flat, z)
    lgam = math.lgamma(a)

    active = np.ones(flat.shape, dtype=bool)
    for _ in range(profile.max_newton_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        resid = _tail_residual(a, xa, tail[idx], upper[idx])
        dens = np.exp((a - 1.0) * np.log(xa) - xa - lgam)
        step = resid / dens
        corr = 1.0 - 0.5 * np.minimum(1.0, step * ((a - 1.0) / xa - 1.0))
        new = xa - step / corr
        new = np.where(new > 0.0, new, 0.5 * xa)
        x[idx] = new
        done = (np.abs(new - xa) <= 1e-14 * new) | (resid == 0.0)
        active[idx[done]] = False

    q = 2.0 * x
    resid = np.abs(_tail_residual(a, x, tail, upper))
    if active.any() and np.any(resid[active] > profile.abs_cdf_roundtrip):
        raise QuantileConvergenceError(
            f"chi-square quantile (df={df}) did not converge in {profile.max_newton_iters} iterations",
            q.reshape(np.shape(u)),
        )
    if np.any(resid > profile.abs_cdf_roundtrip):
        raise QuantileConvergenceError(
            f"chi-square quantile (df={df}) misses round-trip tolerance {profile.abs_cdf_roundtrip}",
            q.reshape(np.shape(u)),
        )
    return _scalar_or_array(q.reshape(np.shape(u)), u)
