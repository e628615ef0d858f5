"""Closed forms and asymptotic evaluators.

Product functions f = prod_j g_j(x_j) have mean dimension
``sum(rho) / (1 - prod(1 - rho))`` with ``rho_j = Var(g_j) / E[g_j^2]``.
For ``f = (z_{1:d} / mu_{1:d})^p`` the evaluators below return the
truncated moment and variance expansions, the upper expansion for the
sum of total indices, and the resulting bound on the mean dimension.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import FiniteDiscrete, MomentSummary, StandardNormal, beta_constant

log = logging.getLogger(__name__)

THETA_RANGE = (1e-9, 1e9)


@dataclass(frozen=True, eq=False)
class RhoVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.size == 0 or np.any(v < 0) or np.any(v > 1) or not np.all(np.isfinite(v)):
            raise ValueError("rho values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def zero(self):
        return self.values == 0

    @property
    def one(self):
        return self.values == 1


def product_mean_dimension(rho) -> float:
    """Mean dimension of a product function from its per-factor rho values."""
    r = rho.values if isinstance(rho, RhoVector) else RhoVector(rho).values
    if not np.any(r > 0):
        raise ValueError("mean dimension undefined when every rho is 0")
    # 1 - prod(1 - rho) without cancellation when all rho are small
    with np.errstate(divide="ignore"):
        denom = -math.expm1(float(np.sum(np.log1p(-r))))
    return float(np.sum(r)) / denom


def gaussian_rho(theta: float, c: float = 0.0, law=None) -> float:
    """rho for the factor ``exp(-(x - c)^2 / theta^2)``.

    Closed form for ``x ~ N(0, 1)`` (the default law): with ``b = 1/theta^2``,
    ``E[exp(-b (x - c)^2)] = (1 + 2b)^(-1/2) exp(-b c^2 / (1 + 2b))``.
    A FiniteDiscrete law is summed exactly.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    if law is None or isinstance(law, StandardNormal):
        b = 1.0 / theta ** 2
        # log(m1^2 / m2), arranged so no terms cancel for small or large b
        if b < 1:
            log_scale = 0.5 * math.log1p(-4 * b * b / (1 + 2 * b) ** 2)
        else:
            log_scale = 0.5 * math.log1p(4 * b) - math.log1p(2 * b)
        log_ratio = log_scale - 4 * b * b * c * c / ((1 + 2 * b) * (1 + 4 * b))
        return -math.expm1(log_ratio)
    if isinstance(law, FiniteDiscrete):
        v, p = np.asarray(law.values), np.asarray(law.probs)
        e = -((v - c) ** 2) / theta ** 2
        # rho is scale free in g, so shift the exponent to avoid underflow
        g = np.exp(e - e.max())
        m1, m2 = float(np.dot(p, g)), float(np.dot(p, g * g))
        return max(0.0, 1.0 - m1 * m1 / m2)
    raise TypeError(f"no rho formula for law {law!r}")


def gaussian_product_nu(theta: float, centers, law=None) -> float:
    return product_mean_dimension([gaussian_rho(theta, c, law) for c in centers])


class BracketError(ValueError):
    pass


def tune_theta(d: int, centers, target_nu: float, tol: float = 1e-8, law=None,
               grid_per_decade: int = 10, max_bisections: int = 200) -> float:
    """Find theta so the Gaussian product RBF has mean dimension ``target_nu``.

    Scans log(theta) over [1e-9, 1e9] for a sign change of nu - target,
    then bisects on log(theta). If the scan shows more than one crossing
    the leftmost is used and a warning is issued.
    """
    if not 1 < target_nu < d:
        raise ValueError(f"target mean dimension must lie in (1, {d})")
    if not tol > 0:
        raise ValueError("tol must be positive")
    centers = tuple(centers) if centers is not None else (0.0,) * d
    if len(centers) != d:
        raise ValueError("need one center per coordinate")

    def excess(log_theta):
        rho = [gaussian_rho(math.exp(log_theta), c, law) for c in centers]
        if not any(rho):
            # every factor numerically constant; nu -> 1 in this limit
            return 1.0 - target_nu
        return product_mean_dimension(rho) - target_nu

    lo, hi = (math.log(t) for t in THETA_RANGE)
    grid = np.linspace(lo, hi, int(round((hi - lo) / math.log(10) * grid_per_decade)) + 1)
    vals = np.array([excess(t) for t in grid])
    sign = np.sign(vals)
    crossings = np.flatnonzero(sign[:-1] * sign[1:] <= 0)
    if crossings.size == 0:
        achieved = vals + target_nu
        raise BracketError(
            f"target {target_nu} not bracketed; nu ranges over "
            f"[{achieved.min():.6g}, {achieved.max():.6g}] for theta in {THETA_RANGE}"
        )
    if crossings.size > 1 and np.any(np.diff(crossings) > 1):
        warnings.warn("nu(theta) is not monotone on the scan grid; using the leftmost crossing")
        log.warning("non-monotone nu(theta) scan for target %s", target_nu)
    i = crossings[0]
    a, b = grid[i], grid[i + 1]
    fa = vals[i]
    if fa == 0:
        return math.exp(a)
    mid = a
    for _ in range(max_bisections):
        mid = 0.5 * (a + b)
        fm = excess(mid)
        if abs(fm) <= tol or b - a < 1e-15:
            break
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return math.exp(mid)


def falling_factorial(p: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= p - i
    return out


def _ratios(summary: MomentSummary):
    mu = summary.mu_total
    if not mu > 0:
        raise ValueError("expansions need mu_{1:d} > 0")
    s2 = summary.sigma2_total
    return mu, s2, summary.central_total(3)


def moment_expansion_p(summary: MomentSummary, p: float) -> float:
    """Truncated expansion of ``E[(z_{1:d} / mu_{1:d})^p]`` through the d^-2 terms."""
    if not p < 6:
        raise ValueError("moment expansion needs p < 6")
    mu, s2, m3 = _ratios(summary)
    r2 = s2 / mu ** 2
    return (1.0 + falling_factorial(p, 2) / 2 * r2
            + falling_factorial(p, 3) / 6 * m3 / mu ** 3
            + falling_factorial(p, 4) / 24 * 3 * r2 * r2)


def variance_expansion(summary: MomentSummary, p: float) -> float:
    """Asymptotic ``Var((z_{1:d} / mu_{1:d})^p)`` for ``p <= 1``."""
    if p > 1:
        raise ValueError("variance expansion needs p <= 1")
    mu, s2, m3 = _ratios(summary)
    r2 = s2 / mu ** 2
    lead = p * p * r2
    if s2 == 0:
        return 0.0
    return lead * (1.0 + (p - 1) * m3 / (s2 * mu) + 0.5 * (p - 1) * (3 * p - 5) * r2)


def tau_sum_bound(summary: MomentSummary, p: float) -> float:
    """Upper expansion for the sum of total indices, ``p < 1``."""
    if not p < 1:
        raise ValueError("tau sum bound needs p < 1")
    mu, s2, m3 = _ratios(summary)
    r2 = s2 / mu ** 2
    if s2 == 0:
        return 0.0
    return p * p * r2 * (1.0 + (p - 1) * (2 * p - 3) * r2 + (p - 1) * m3 / (mu * s2))


def theorem_nu_bound(summary: MomentSummary, p: float, allow_zero: bool = False) -> float:
    """``1 + (p - 1)^2 / 2 * sigma2_{1:d} / mu_{1:d}^2``.

    Defined for nonzero ``p <= 1``; ``allow_zero`` evaluates the degenerate
    p = 0 case used for the log-transform experiment.
    """
    if p > 1 or (p == 0 and not allow_zero):
        raise ValueError("bound needs nonzero p <= 1")
    mu, s2, _ = _ratios(summary)
    return 1.0 + (p - 1) ** 2 / 2 * s2 / mu ** 2


def prop_const_upper_bound(summary: MomentSummary, p: float) -> float:
    """``beta^p``, a bound on ``E[(z_{1:d}/mu_{1:d})^p]`` for ``p < 0`` once ``d >= -p/alpha``."""
    if not p < 0:
        raise ValueError("constant bound needs p < 0")
    beta = beta_constant(summary)
    if summary.dim < -p / summary.alpha:
        raise ValueError(f"bound needs d >= {-p / summary.alpha:g}, have d = {summary.dim}")
    return beta ** p


@dataclass(frozen=True)
class ExpansionReport:
    d: int
    p: float
    mu_total: float
    sigma2_total: float
    m3_total: float
    moment_expansion: float
    variance_expansion: float
    tau_sum_bound: float
    nu_bound: float

    def row(self) -> dict:
        return dict(self.__dict__)


def expansion_report(summary: MomentSummary, p: float) -> ExpansionReport:
    return ExpansionReport(
        d=summary.dim, p=p,
        mu_total=summary.mu_total, sigma2_total=summary.sigma2_total,
        m3_total=summary.central_total(3),
        moment_expansion=moment_expansion_p(summary, p),
        variance_expansion=variance_expansion(summary, p),
        tau_sum_bound=tau_sum_bound(summary, p),
        nu_bound=theorem_nu_bound(summary, p),
    )
