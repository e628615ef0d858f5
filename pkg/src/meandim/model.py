"""Integrand families, input laws and moment summaries.

Every integrand is evaluated row-wise on an ``(n, d)`` array (a single
length-``d`` point is also accepted). Every input law knows how to map
uniform ``(0, 1)`` values to its native scale, so QMC points can be pushed
through an :class:`InputModel` column by column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np

from .special import chisq_quantile, normal_quantile


class DomainError(ValueError):
    """Evaluation at a singular or invalid input."""


def _as_rows(x, d):
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    rows = arr.reshape(1, -1) if single else arr
    if rows.ndim != 2 or rows.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {arr.shape}")
    return rows, single


def _finish(values, single):
    return float(values[0]) if single else values


class _SumForm:
    """Integrands of the form ``outer(sum_j term_j(x_j))``.

    Hybrid points x_{-j}:x'_j only change one term of the sum, so all ``d``
    hybrids of a row cost one subtraction and one addition each.
    """

    def terms(self, rows):
        raise NotImplementedError

    def outer(self, s):
        raise NotImplementedError

    def evaluate(self, x):
        rows, single = _as_rows(x, self.dim)
        return _finish(self.outer(self.terms(rows).sum(axis=1)), single)

    def hybrid_values(self, x, xp):
        """``out[i, j] = f(x_i with coordinate j taken from xp_i)``."""
        t, tp = self.terms(x), self.terms(xp)
        s = t.sum(axis=1, keepdims=True)
        return self.outer(s - t + tp)


@dataclass(frozen=True)
class Multiquadric(_SumForm):
    """``(a + sum_j (x_j - c_j)^2)^p``."""

    p: float
    a: float
    centers: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        if self.p == 0 or self.p > 1:
            raise ValueError("multiquadric exponent must be nonzero and at most 1")
        if self.a < 0:
            raise ValueError("a must be nonnegative")
        if not self.centers:
            raise ValueError("need at least one center coordinate")

    @property
    def dim(self):
        return len(self.centers)

    def terms(self, rows):
        t = (rows - np.asarray(self.centers)) ** 2
        t[:, 0] += self.a
        return t

    def outer(self, s):
        if self.p < 0 and np.any(s == 0):
            raise DomainError("multiquadric with p < 0 evaluated at its center (a = 0)")
        return s ** self.p

    def radial_profile(self) -> Callable[[np.ndarray], np.ndarray]:
        if any(self.centers):
            raise ValueError("radial profile needs all centers at the origin")
        a, p = self.a, self.p
        return lambda s: (a + s) ** p


@dataclass(frozen=True)
class MultiquadricZ(_SumForm):
    """``((a + z_{1:d}) / mu_total)^p`` on nonnegative ``z``; ``a`` is folded into ``z_1``."""

    p: float
    d: int
    mu_total: float = 1.0
    a: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.p == 0:
            raise ValueError("p must be nonzero")
        if not self.mu_total > 0:
            raise ValueError("mu_total must be positive")
        if self.a < 0:
            raise ValueError("a must be nonnegative")

    @property
    def dim(self):
        return self.d

    def terms(self, rows):
        if np.any(rows < 0):
            raise DomainError("z inputs must be nonnegative")
        t = np.array(rows, dtype=np.float64)
        t[:, 0] += self.a
        return t

    def outer(self, s):
        if self.p < 0 and np.any(s == 0):
            raise DomainError("z_{1:d} = 0 is a singularity for p < 0")
        return (s / self.mu_total) ** self.p

    def radial_profile(self) -> Callable[[np.ndarray], np.ndarray]:
        """Profile in ``s = sum_j z_j`` (valid when ``z_j = x_j^2``)."""
        a, p, mu = self.a, self.p, self.mu_total
        return lambda s: ((a + s) / mu) ** p


@dataclass(frozen=True)
class LogZ(_SumForm):
    """``log((a + z_{1:d}) / mu_total)``, the p -> 0 companion of MultiquadricZ."""

    d: int
    mu_total: float = 1.0
    a: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.mu_total > 0:
            raise ValueError("mu_total must be positive")
        if self.a < 0:
            raise ValueError("a must be nonnegative")

    @property
    def dim(self):
        return self.d

    def terms(self, rows):
        if np.any(rows < 0):
            raise DomainError("z inputs must be nonnegative")
        t = np.array(rows, dtype=np.float64)
        t[:, 0] += self.a
        return t

    def outer(self, s):
        if np.any(s == 0):
            raise DomainError("log of z_{1:d} = 0")
        return np.log(s / self.mu_total)

    def radial_profile(self) -> Callable[[np.ndarray], np.ndarray]:
        a, mu = self.a, self.mu_total
        return lambda s: np.log((a + s) / mu)


@dataclass(frozen=True)
class GaussianProduct(_SumForm):
    """``prod_j exp(-(x_j - c_j)^2 / theta^2)``."""

    theta: float
    centers: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not self.centers:
            raise ValueError("need at least one center coordinate")

    @property
    def dim(self):
        return len(self.centers)

    def terms(self, rows):
        return (rows - np.asarray(self.centers)) ** 2 / self.theta ** 2

    def outer(self, s):
        return np.exp(-s)


@dataclass(frozen=True)
class Keister(_SumForm):
    """``cos(||x|| / 2)``."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")

    @property
    def dim(self):
        return self.d

    def terms(self, rows):
        return rows * rows

    def outer(self, s):
        return np.cos(0.5 * np.sqrt(s))

    def radial_profile(self) -> Callable[[np.ndarray], np.ndarray]:
        return lambda s: np.cos(0.5 * np.sqrt(s))


@dataclass(frozen=True)
class SyntheticAdditive(_SumForm):
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")

    @property
    def dim(self):
        return self.d

    def terms(self, rows):
        return rows

    def outer(self, s):
        return s


@dataclass(frozen=True)
class SyntheticProduct:
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")

    @property
    def dim(self):
        return self.d

    def evaluate(self, x):
        rows, single = _as_rows(x, self.d)
        return _finish(np.prod(rows, axis=1), single)

    def hybrid_values(self, x, xp):
        out = np.empty_like(x)
        for j in range(self.d):
            y = x.copy()
            y[:, j] = xp[:, j]
            out[:, j] = self.evaluate(y)
        return out


FunctionSpec = Union[Multiquadric, MultiquadricZ, LogZ, GaussianProduct, Keister, SyntheticAdditive, SyntheticProduct]


def evaluate(spec: FunctionSpec, x):
    """Evaluate ``spec`` at one point (returns float) or at each row of ``x``."""
    return spec.evaluate(x)


def fold_z(a: float, centers, x):
    """Map x to z: ``z_1 = a + (x_1 - c_1)^2``, ``z_j = (x_j - c_j)^2`` otherwise."""
    rows, single = _as_rows(x, len(centers))
    z = (rows - np.asarray(centers, dtype=np.float64)) ** 2
    z[:, 0] += a
    return z[0] if single else z


# ---------------------------------------------------------------- input laws


def _central_from_raw(raw):
    """Central moments 2..6 from raw moments ``raw[k] = E[X^k]``, k = 0..6."""
    mu = raw[1]
    out = []
    for k in range(2, 7):
        out.append(sum(math.comb(k, i) * raw[i] * (-mu) ** (k - i) for i in range(k + 1)))
    return out


@dataclass(frozen=True)
class StandardNormal:
    def quantile(self, u):
        return normal_quantile(u)

    def moments(self):
        return (0.0, 1.0, 0.0, 3.0, 0.0, 15.0)


@dataclass(frozen=True)
class NormalShift:
    """Law of ``z = (x - c)^2`` with ``x ~ N(0, 1)`` (noncentral chi-square(1), noncentrality c^2)."""

    c: float = 0.0

    def quantile(self, u):
        return (normal_quantile(u) - self.c) ** 2

    def moments(self):
        mean, var, m3, m4 = noncentral_chi1_moments(self.c)
        # E[(x - c)^(2k)] from E[x^i] = (i - 1)!! for even i
        def raw_shifted(m):
            return sum(math.comb(m, i) * _double_factorial(i - 1) * (-self.c) ** (m - i)
                       for i in range(0, m + 1, 2))
        raw = [raw_shifted(2 * k) for k in range(7)]
        central = _central_from_raw(raw)
        return (mean, var, m3, m4, central[3], central[4])


def _double_factorial(n):
    return 1 if n <= 0 else n * _double_factorial(n - 2)


@dataclass(frozen=True)
class ChiSquare:
    df: float

    def __post_init__(self):
        if not self.df > 0:
            raise ValueError("df must be positive")

    def quantile(self, u):
        return chisq_quantile(self.df, u)

    def moments(self):
        k = self.df
        # cumulants 2^(n-1) (n-1)! k
        k2, k3, k4, k5, k6 = (2 ** (n - 1) * math.factorial(n - 1) * k for n in range(2, 7))
        return (k, k2, k3, k4 + 3 * k2 ** 2, k5 + 10 * k3 * k2, k6 + 15 * k4 * k2 + 10 * k3 ** 2 + 15 * k2 ** 3)


@dataclass(frozen=True)
class FiniteDiscrete:
    """Finite law; the unit-cube transform buckets u by the CDF (ties go to the lower index)."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        if not values or len(values) != len(probs):
            raise ValueError("values and probs must be non-empty and of equal length")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("values must be finite")
        if any(p < 0 for p in probs):
            raise ValueError("probs must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError("probs must sum to 1")

    @classmethod
    def uniform(cls, values):
        values = tuple(values)
        return cls(values, (1.0 / len(values),) * len(values))

    @property
    def size(self):
        return len(self.values)

    def quantile(self, u):
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(cum, np.asarray(u), side="left")
        return np.asarray(self.values)[np.minimum(idx, len(self.values) - 1)]

    def moments(self):
        v, p = np.asarray(self.values), np.asarray(self.probs)
        mean = float(np.dot(p, v))
        dev = v - mean
        return (mean,) + tuple(float(np.dot(p, dev ** k)) for k in range(2, 7))


Distribution = Union[StandardNormal, NormalShift, ChiSquare, FiniteDiscrete]


def noncentral_chi1_moments(c: float):
    """(mean, variance, third, fourth central moment) of ``(x - c)^2``, ``x ~ N(0, 1)``."""
    c2 = c * c
    return (1.0 + c2, 2.0 * (1.0 + 2.0 * c2), 8.0 * (1.0 + 3.0 * c2),
            12.0 * (1.0 + 2.0 * c2) ** 2 + 48.0 * (1.0 + 4.0 * c2))


def chisq_negative_moment(df: float, alpha: float) -> float:
    """``E[z^-alpha]`` for ``z ~ chi-square(df)``; finite for ``alpha < df / 2``."""
    if not alpha < df / 2:
        raise ValueError("negative moment is infinite for alpha >= df/2")
    return math.exp(-alpha * math.log(2.0) + math.lgamma(df / 2 - alpha) - math.lgamma(df / 2))


# ---------------------------------------------------------------- summaries


@dataclass(frozen=True, eq=False)
class MomentSummary:
    """Per-coordinate moments and their sums.

    ``central[k]`` holds the k-th central moments (k = 3..6) per coordinate.
    The optional assumption constants feed :func:`beta_constant`.
    """

    mean: np.ndarray
    var: np.ndarray
    central: dict[int, np.ndarray] = field(repr=False)
    alpha: float | None = None
    M_alpha: float | None = None
    lam: float | None = None
    mu_lower: float | None = None
    mu_upper: float | None = None
    sigma2_upper: float | None = None

    def __post_init__(self):
        if np.any(self.var < 0):
            raise ValueError("variances must be nonnegative")

    @classmethod
    def from_moments(cls, rows, **constants):
        arr = np.asarray(rows, dtype=np.float64).reshape(-1, 6)
        return cls(arr[:, 0].copy(), arr[:, 1].copy(),
                   {k: arr[:, k - 1].copy() for k in range(3, 7)}, **constants)

    @classmethod
    def iid(cls, moments, d, **constants):
        return cls.from_moments(np.tile(np.asarray(moments, dtype=np.float64), (d, 1)), **constants)

    @property
    def dim(self):
        return self.mean.size

    @property
    def mu_total(self):
        return float(self.mean.sum())

    @property
    def sigma2_total(self):
        return float(self.var.sum())

    def central_total(self, k):
        if k == 2:
            return self.sigma2_total
        return float(self.central[k].sum())

    def with_assumptions(self, **constants):
        return replace(self, **constants)

    def concat(self, other: "MomentSummary") -> "MomentSummary":
        return MomentSummary(
            np.concatenate([self.mean, other.mean]),
            np.concatenate([self.var, other.var]),
            {k: np.concatenate([self.central[k], other.central[k]]) for k in self.central},
        )


def beta_constant(summary: MomentSummary) -> float:
    """``1 / (mu_lower * M_alpha^(1/alpha))``."""
    a, M, lo = summary.alpha, summary.M_alpha, summary.mu_lower
    if a is None or M is None or lo is None:
        raise ValueError("beta needs alpha, M_alpha and mu_lower on the summary")
    if not (a > 0 and lo > 0 and 0 < M < math.inf):
        raise ValueError("beta needs alpha > 0, mu_lower > 0 and finite positive M_alpha")
    return 1.0 / (lo * M ** (1.0 / a))


@dataclass(frozen=True)
class InputModel:
    """Independent per-coordinate input laws."""

    dists: tuple

    def __post_init__(self):
        object.__setattr__(self, "dists", tuple(self.dists))
        if not self.dists:
            raise ValueError("input model needs at least one coordinate")

    @classmethod
    def iid(cls, dist, d):
        return cls((dist,) * d)

    @property
    def dim(self):
        return len(self.dists)

    def concat(self, other: "InputModel") -> "InputModel":
        return InputModel(self.dists + other.dists)

    def transform(self, u):
        """Map an ``(n, d)`` array of unit-cube points to native inputs."""
        u = np.asarray(u, dtype=np.float64)
        if u.ndim != 2 or u.shape[1] != self.dim:
            raise ValueError(f"expected (n, {self.dim}) unit-cube points, got {u.shape}")
        out = np.empty_like(u)
        groups: dict = {}
        for j, dist in enumerate(self.dists):
            groups.setdefault(dist, []).append(j)
        for dist, cols in groups.items():
            out[:, cols] = np.asarray(dist.quantile(u[:, cols]))
        return out

    def moments(self, **constants) -> MomentSummary:
        return MomentSummary.from_moments([d.moments() for d in self.dists], **constants)

    @property
    def is_finite(self):
        return all(isinstance(d, FiniteDiscrete) for d in self.dists)


# ---------------------------------------------------------------- JSON


_SPEC_TYPES = {
    "multiquadric": Multiquadric,
    "multiquadric_z": MultiquadricZ,
    "log_z": LogZ,
    "gaussian_product": GaussianProduct,
    "keister": Keister,
    "synthetic_additive": SyntheticAdditive,
    "synthetic_product": SyntheticProduct,
}
_DIST_TYPES = {
    "standard_normal": StandardNormal,
    "normal_shift": NormalShift,
    "chi_square": ChiSquare,
    "finite_discrete": FiniteDiscrete,
}


def _to_dict(obj, table):
    name = next(k for k, v in table.items() if isinstance(obj, v))
    out = {"type": name}
    for key, value in obj.__dict__.items():
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


def _from_dict(data, table, what):
    data = dict(data)
    kind = data.pop("type", None)
    if kind not in table:
        raise ValueError(f"unknown {what} type {kind!r}; expected one of {sorted(table)}")
    return table[kind](**data)


def spec_to_dict(spec: FunctionSpec) -> dict:
    return _to_dict(spec, _SPEC_TYPES)


def spec_from_dict(data: dict) -> FunctionSpec:
    return _from_dict(data, _SPEC_TYPES, "function")


def dist_to_dict(dist) -> dict:
    return _to_dict(dist, _DIST_TYPES)


def dist_from_dict(data: dict):
    return _from_dict(data, _DIST_TYPES, "distribution")


def inputs_to_dict(inputs: InputModel) -> dict:
    first = inputs.dists[0]
    if all(d == first for d in inputs.dists):
        return {"iid": dist_to_dict(first), "d": inputs.dim}
    return {"coords": [dist_to_dict(d) for d in inputs.dists]}


def inputs_from_dict(data) -> InputModel:
    if isinstance(data, list):
        return InputModel(tuple(dist_from_dict(d) for d in data))
    if "iid" in data:
        return InputModel.iid(dist_from_dict(data["iid"]), int(data["d"]))
    return InputModel(tuple(dist_from_dict(d) for d in data["coords"]))
