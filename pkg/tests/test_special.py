import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meandim.special import (
    QuantileConvergenceError,
    ToleranceProfile,
    chisq_cdf,
    chisq_quantile,
    gamma_p,
    gamma_q,
    normal_cdf,
    normal_quantile,
)

# 40-digit reference values (mpmath findroot / erf) at the exact binary
# value of each float input, frozen
Q_975 = 1.959963984540054235524594430520551527956
Q_1E_300 = -37.04709629936119923722296250786043684435
P_HALF_HALF = 0.6826894921370858971704650912640758449558
CHISQ_REFERENCE = [
    (24, 0.3, 19.94322874203867853248426),
    (999, 0.999, 1142.847983891035526197012),
    (3, 0.01, 0.1148318018991170391512227),
    (1, 0.999999, 23.92812697687946905670125),
]


def test_normal_quantile_values():
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.975) == pytest.approx(Q_975, rel=1e-14)
    assert normal_quantile(1e-300) == pytest.approx(Q_1E_300, rel=1e-13)
    assert math.isfinite(normal_quantile(5e-324))


def test_normal_quantile_odd_symmetry():
    u = np.arange(1, 512) / 1024.0
    np.testing.assert_array_equal(normal_quantile(u), -normal_quantile(1.0 - u))


def test_normal_roundtrip():
    u = np.concatenate([np.logspace(-300, -1, 300), np.linspace(0.1, 0.9, 81)])
    x = normal_quantile(u)
    lower = u < 0.5
    # relative CDF error grows like x^2 times the quantile's relative error
    np.testing.assert_allclose(normal_cdf(x[lower]), u[lower], rtol=1e-12)
    np.testing.assert_allclose(normal_cdf(x[~lower]), u[~lower], rtol=1e-14)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_normal_domain(u):
    with pytest.raises(ValueError):
        normal_quantile(u)


def test_gamma_p_examples():
    assert gamma_p(3.0, 0.0) == 0.0
    assert gamma_p(1.0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-15)
    assert gamma_p(0.5, 0.5) == pytest.approx(P_HALF_HALF, rel=1e-15)
    assert gamma_p(2.0, 1e4) == 1.0
    assert gamma_p(2.5, 3.0) + gamma_q(2.5, 3.0) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        gamma_p(0.0, 1.0)
    with pytest.raises(ValueError):
        gamma_p(1.0, -1.0)


def test_gamma_p_quadrature_oracle():
    from scipy.integrate import quad

    a, x = 0.5, 0.5
    val, _ = quad(lambda t: t ** (a - 1) * math.exp(-t), 0, x)
    assert gamma_p(a, x) == pytest.approx(val / math.gamma(a), rel=1e-10)


def test_chisq_quantile_examples():
    assert chisq_quantile(2, 0.5) == pytest.approx(2 * math.log(2), rel=1e-14)
    assert chisq_quantile(1, P_HALF_HALF) == pytest.approx(1.0, rel=1e-13)
    for df, u, q in CHISQ_REFERENCE:
        assert chisq_quantile(df, u) == pytest.approx(q, rel=1e-12)


@pytest.mark.parametrize("df", [1, 2, 24, 999, 0.3, 3.5])
def test_chisq_roundtrip_and_monotone(df):
    u = np.concatenate([np.logspace(-20 * math.log10(2), math.log10(0.5), 200) , [0.5]])
    u = np.concatenate([u, 1.0 - u[::-1]])
    u = np.unique(u)
    q = chisq_quantile(df, u)
    assert np.max(np.abs(chisq_cdf(df, q) - u)) <= 1e-10
    assert np.all(np.diff(q) > 0)


def test_chisq_extreme_probabilities():
    for df in (1, 2, 24, 999):
        for u in (2.0 ** -33, 1 - 2.0 ** -33):
            q = chisq_quantile(df, u)
            assert abs(chisq_cdf(df, q) - u) <= 1e-10


def test_squared_normal_is_chisq1():
    u = np.linspace(0.5001, 0.9999, 500)
    np.testing.assert_allclose(normal_quantile(u) ** 2, chisq_quantile(1, 2 * u - 1), rtol=1e-8, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(df=st.floats(0.2, 2000), u=st.floats(1e-12, 1 - 1e-12))
def test_chisq_roundtrip_property(df, u):
    q = chisq_quantile(df, u)
    assert q > 0
    assert abs(chisq_cdf(df, q) - u) <= 1e-10


def test_chisq_errors():
    with pytest.raises(ValueError):
        chisq_quantile(0, 0.5)
    with pytest.raises(ValueError):
        chisq_quantile(3, 1.0)


def test_nonconvergence_carries_last_iterate():
    with pytest.raises(QuantileConvergenceError) as info:
        chisq_quantile(24, np.array([0.3, 0.9]), ToleranceProfile(abs_cdf_roundtrip=1e-300, max_newton_iters=1))
    assert info.value.last_iterate.shape == (2,)
    assert np.all(info.value.last_iterate > 0)


def test_tolerance_profile_validation():
    with pytest.raises(ValueError):
        ToleranceProfile(abs_cdf_roundtrip=0.0)
    with pytest.raises(ValueError):
        ToleranceProfile(max_newton_iters=0)
