"""Randomized-QMC estimates of variance, total indices and mean dimension.

Three estimators:

* ``estimate_mean_dimension_radial`` for f(x) = g(||x||^2) with i.i.d.
  N(0, 1) inputs. Coordinates are exchangeable, so nu = d tau_1 / sigma^2;
  sigma^2 comes from a midpoint rule on the chi-square(d) quantile and
  tau_1 from a 3-dimensional scrambled Sobol' rule.
* ``estimate_mean_dimension_generic`` for any spec/input model, using
  Jansen's pair formula on every coordinate with points in (0,1)^{2d}.

Replicates reuse one raw Sobol' net with independent scramble seeds
derived from ``(master_seed, d, replicate)``.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field

import numpy as np

from .anova import DegenerateVarianceError
from .lowdisc import (
    DirectionTable,
    ZERO_REPLACEMENT,
    default_direction_table,
    midpoint_grid,
    owen_scramble,
    owen_scramble_bits,
    sobol_bits,
    sobol_points,
)
from .model import ChiSquare, InputModel
from .special import chisq_quantile, normal_cdf, normal_quantile

VARIANCE_FLOOR = 1e-300


def derive_seed(master_seed: int, d: int, replicate: int) -> int:
    """64-bit scramble seed for one (d, replicate) task."""
    ss = np.random.SeedSequence([int(master_seed), int(d), int(replicate)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class EstimateReport:
    d: int
    n: int
    sigma2: np.ndarray
    sum_tau2: np.ndarray
    nu: np.ndarray
    seeds: tuple[int, ...]
    wall_time: float = field(default=0.0, compare=False)
    method: str = "generic"
    theory_bound: float | None = None

    @property
    def R(self) -> int:
        return len(self.seeds)

    @property
    def pooled_sigma2(self) -> float:
        return float(np.mean(self.sigma2))

    @property
    def pooled_sum_tau2(self) -> float:
        return float(np.mean(self.sum_tau2))

    @property
    def pooled_nu(self) -> float:
        """Ratio of pooled means, not the mean of per-replicate ratios."""
        return self.pooled_sum_tau2 / self.pooled_sigma2

    @property
    def nu_se(self) -> float:
        if self.R < 2:
            return float("nan")
        return float(np.std(self.nu, ddof=1) / np.sqrt(self.R))

    def rows(self) -> list[dict]:
        """One record per replicate plus a pooled record."""
        out = [
            dict(d=self.d, replicate=r, n=self.n, sigma2=float(self.sigma2[r]),
                 sum_tau2=float(self.sum_tau2[r]), nu=float(self.nu[r]), seed=self.seeds[r])
            for r in range(self.R)
        ]
        out.append(dict(d=self.d, replicate="pooled", n=self.n, sigma2=self.pooled_sigma2,
                        sum_tau2=self.pooled_sum_tau2, nu=self.pooled_nu, seed=""))
        return out


def _quantile_law(law):
    if hasattr(law, "quantile"):
        return law.quantile
    if callable(law):
        return law
    raise TypeError("law needs a quantile transform")


def estimate_variance_1d(g, law, n: int) -> float:
    """Sample variance (denominator n-1) of ``g`` at the law's quantiles of a midpoint grid."""
    if n < 2:
        raise ValueError("need n >= 2 for a sample variance")
    u = midpoint_grid(n).values[:, 0]
    y = np.asarray(g(_quantile_law(law)(u)), dtype=np.float64)
    if y.ndim == 0:
        y = np.full(n, float(y))
    return float(np.var(y, ddof=1))


@functools.lru_cache(maxsize=16)
def _raw_sobol(table: DirectionTable, n: int, dim: int):
    return sobol_points(table, n, dim)


def _radial_tau(g, d, points, z3_df):
    u = points.values
    z1 = chisq_quantile(d - 1, u[:, 0]) if d > 1 else np.zeros(u.shape[0])
    z2 = chisq_quantile(1, u[:, 1])
    z3 = chisq_quantile(z3_df, u[:, 2])
    diff = np.asarray(g(z1 + z2), dtype=np.float64) - np.asarray(g(z1 + z3), dtype=np.float64)
    return 0.5 * float(np.mean(diff * diff))


def jansen_radial_tau(fradial, d: int, n: int, seed: int, table: DirectionTable | None = None,
                      z3_df: int = 1) -> float:
    """Total index of one coordinate of ``x -> fradial(||x||^2)``, x ~ N(0, I_d).

    ``z1 ~ chi2(d-1)`` carries the other coordinates, ``z2`` and ``z3`` are
    the squared coordinate and its independent copy.
    """
    if d < 2:
        raise ValueError("radial Jansen estimate needs d >= 2")
    table = table or default_direction_table()
    points = owen_scramble(_raw_sobol(table, n, 3), seed)
    return _radial_tau(fradial, d, points, z3_df)


def _radial_profile(spec):
    if hasattr(spec, "radial_profile"):
        return spec.radial_profile()
    if callable(spec):
        return spec
    raise TypeError(f"{type(spec).__name__} is not a radial function")


def estimate_mean_dimension_radial(spec, d: int, n: int, R: int, master_seed: int,
                                   table: DirectionTable | None = None, z3_df: int = 1) -> EstimateReport:
    """Mean dimension of a radial integrand with i.i.d. standard normal inputs.

    ``spec`` is a Keister spec, a multiquadric centred at the origin, or a
    callable ``g`` giving f(x) = g(||x||^2).
    """
    if R < 1:
        raise ValueError("need at least one replicate")
    if d < 1:
        raise ValueError("d must be >= 1")
    start = time.perf_counter()
    g = _radial_profile(spec)
    table = table or default_direction_table()
    sigma2 = estimate_variance_1d(g, ChiSquare(d), n)
    if sigma2 < VARIANCE_FLOOR:
        raise DegenerateVarianceError(f"estimated variance {sigma2:g} is degenerate")
    raw = _raw_sobol(table, n, 3)
    seeds = tuple(derive_seed(master_seed, d, r) for r in range(R))
    tau = np.array([_radial_tau(g, d, owen_scramble(raw, s, replicate_id=r), z3_df)
                    for r, s in enumerate(seeds)])
    sum_tau2 = d * tau
    return EstimateReport(
        d=d, n=n, sigma2=np.full(R, sigma2), sum_tau2=sum_tau2, nu=sum_tau2 / sigma2,
        seeds=seeds, wall_time=time.perf_counter() - start, method="radial",
    )


def _unit(bits):
    u = bits.astype(np.float64) * 2.0 ** -32
    u[u == 0.0] = ZERO_REPLACEMENT
    return u


def _hybrids(spec, x, xp):
    if hasattr(spec, "hybrid_values"):
        return spec.hybrid_values(x, xp)
    out = np.empty_like(x)
    for j in range(x.shape[1]):
        y = x.copy()
        y[:, j] = xp[:, j]
        out[:, j] = spec.evaluate(y)
    return out


def estimate_mean_dimension_generic(spec, inputs: InputModel, n: int, R: int, master_seed: int,
                                    table: DirectionTable | None = None,
                                    chunk_elems: int = 1 << 22) -> EstimateReport:
    """Mean dimension by Jansen's formula on every coordinate.

    Columns ``0..d-1`` of each scrambled point give x, columns ``d..2d-1``
    give x'. Per replicate, ``sigma2 = mean((f(x) - f(x'))^2) / 2`` and
    ``tau_j = mean((f(x_{-j}:x'_j) - f(x))^2) / 2``.
    """
    d = inputs.dim
    if spec.dim != d:
        raise ValueError(f"function has dimension {spec.dim}, inputs have {d}")
    if R < 1:
        raise ValueError("need at least one replicate")
    start = time.perf_counter()
    table = table or default_direction_table()
    table.check_dim(2 * d)
    raw = sobol_bits(table, n, 2 * d)
    rows_per_chunk = max(1, chunk_elems // (2 * d))
    seeds = tuple(derive_seed(master_seed, d, r) for r in range(R))
    sigma2 = np.empty(R)
    sum_tau2 = np.empty(R)
    for r, seed in enumerate(seeds):
        pair_sq = 0.0
        tau_sq = np.zeros(d)
        for lo in range(0, n, rows_per_chunk):
            u = _unit(owen_scramble_bits(raw[lo:lo + rows_per_chunk], seed))
            x = inputs.transform(u[:, :d])
            xp = inputs.transform(u[:, d:])
            fx = np.asarray(spec.evaluate(x), dtype=np.float64)
            fxp = np.asarray(spec.evaluate(xp), dtype=np.float64)
            pair_sq += float(np.sum((fx - fxp) ** 2))
            tau_sq += np.sum((_hybrids(spec, x, xp) - fx[:, None]) ** 2, axis=0)
        sigma2[r] = 0.5 * pair_sq / n
        sum_tau2[r] = 0.5 * float(tau_sq.sum()) / n
    if np.any(sigma2 < VARIANCE_FLOOR):
        raise DegenerateVarianceError("estimated variance is degenerate")
    return EstimateReport(
        d=d, n=n, sigma2=sigma2, sum_tau2=sum_tau2, nu=sum_tau2 / sigma2, seeds=seeds,
        wall_time=time.perf_counter() - start, method="generic",
    )


_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class NormalMixtureProposal:
    """Sampling law ``alpha N(0, 1) + (1 - alpha) N(m_j, s_j^2)`` per coordinate.

    Stands in for i.i.d. N(0, 1) inputs. The N(0, 1) share keeps every
    likelihood ratio ``phi(x) / q(x)`` below ``1 / alpha``.
    """

    means: tuple[float, ...]
    scales: tuple[float, ...]
    alpha: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if len(self.means) != len(self.scales) or not self.means:
            raise ValueError("need one mean and one scale per coordinate")
        if not all(s > 0 for s in self.scales):
            raise ValueError("scales must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")

    @property
    def dim(self):
        return len(self.means)

    def cdf(self, x):
        m, s = np.asarray(self.means), np.asarray(self.scales)
        return self.alpha * normal_cdf(x) + (1.0 - self.alpha) * normal_cdf((x - m) / s)

    def pdf(self, x):
        m, s = np.asarray(self.means), np.asarray(self.scales)
        phi = np.exp(-0.5 * x * x - _LOG_SQRT_2PI)
        narrow = np.exp(-0.5 * ((x - m) / s) ** 2 - _LOG_SQRT_2PI) / s
        return self.alpha * phi + (1.0 - self.alpha) * narrow

    def quantile(self, u, bisections: int = 30, newton: int = 3):
        """Column-wise inverse CDF; ``u`` has shape ``(n, dim)``.

        The root lies between the two component quantiles. Bisection on
        that bracket, then Newton steps clipped to it.
        """
        u = np.asarray(u, dtype=np.float64)
        z = np.asarray(normal_quantile(u))
        shifted = np.asarray(self.means) + np.asarray(self.scales) * z
        lo, hi = np.minimum(z, shifted), np.maximum(z, shifted)
        for _ in range(bisections):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(newton):
            dens = self.pdf(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = (self.cdf(x) - u) / dens
            x = np.clip(np.where(np.isfinite(step), x - step, x), lo, hi)
        return x

    def log_weight(self, x):
        """``log phi(x) - log q(x)`` per entry."""
        m, s = np.asarray(self.means), np.asarray(self.scales)
        log_p = -0.5 * x * x - _LOG_SQRT_2PI
        log_narrow = -0.5 * ((x - m) / s) ** 2 - _LOG_SQRT_2PI - np.log(s)
        if self.alpha == 1:
            return np.zeros_like(x)
        return log_p - np.logaddexp(np.log(self.alpha) + log_p, np.log1p(-self.alpha) + log_narrow)


def gaussian_product_proposal(theta: float, centers, alpha: float = 0.1) -> NormalMixtureProposal:
    """Narrow component ``N(0,1) * g^2`` normalized, for ``g = exp(-(x - c)^2 / theta^2)``."""
    t2 = theta * theta
    c = np.asarray(centers, dtype=np.float64)
    scale = theta / np.sqrt(t2 + 4.0)
    return NormalMixtureProposal(tuple(4.0 * c / (t2 + 4.0)), (scale,) * c.size, alpha)


def estimate_mean_dimension_weighted(spec, proposal: NormalMixtureProposal, n: int, R: int,
                                     master_seed: int, table: DirectionTable | None = None,
                                     chunk_elems: int = 1 << 22) -> EstimateReport:
    """Mean dimension under i.i.d. N(0, 1) inputs, sampling from ``proposal``.

    With ``w`` the per-coordinate likelihood ratio and ``W(x) = prod_j w(x_j)``:
    ``tau_j = mean(W(x) w(x'_j) (f(x_{-j}:x'_j) - f(x))^2) / 2`` and
    ``sigma2 = mean(W(x) f(x)^2) - mean(W(x) f(x)) mean(W(x') f(x'))``.
    """
    d = proposal.dim
    if spec.dim != d:
        raise ValueError(f"function has dimension {spec.dim}, proposal has {d}")
    if R < 1:
        raise ValueError("need at least one replicate")
    start = time.perf_counter()
    table = table or default_direction_table()
    table.check_dim(2 * d)
    raw = sobol_bits(table, n, 2 * d)
    rows_per_chunk = max(1, chunk_elems // (2 * d))
    seeds = tuple(derive_seed(master_seed, d, r) for r in range(R))
    sigma2 = np.empty(R)
    sum_tau2 = np.empty(R)
    for r, seed in enumerate(seeds):
        s_f2 = s_f = s_fp = 0.0
        tau_sq = np.zeros(d)
        for lo in range(0, n, rows_per_chunk):
            u = _unit(owen_scramble_bits(raw[lo:lo + rows_per_chunk], seed))
            x = proposal.quantile(u[:, :d])
            xp = proposal.quantile(u[:, d:])
            lw, lwp = proposal.log_weight(x), proposal.log_weight(xp)
            w_x = np.exp(lw.sum(axis=1))
            fx = np.asarray(spec.evaluate(x), dtype=np.float64)
            fxp = np.asarray(spec.evaluate(xp), dtype=np.float64)
            s_f2 += float(np.sum(w_x * fx * fx))
            s_f += float(np.sum(w_x * fx))
            s_fp += float(np.sum(np.exp(lwp.sum(axis=1)) * fxp))
            diff = _hybrids(spec, x, xp) - fx[:, None]
            tau_sq += np.sum(w_x[:, None] * np.exp(lwp) * diff * diff, axis=0)
        sigma2[r] = s_f2 / n - (s_f / n) * (s_fp / n)
        sum_tau2[r] = 0.5 * float(tau_sq.sum()) / n
    if np.any(~(sigma2 > VARIANCE_FLOOR)):
        raise DegenerateVarianceError("estimated variance is degenerate")
    return EstimateReport(
        d=d, n=n, sigma2=sigma2, sum_tau2=sum_tau2, nu=sum_tau2 / sigma2, seeds=seeds,
        wall_time=time.perf_counter() - start, method="weighted",
    )
