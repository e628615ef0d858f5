import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meandim.anova import exact_anova
from meandim.estimate import estimate_mean_dimension_radial
from meandim.model import (
    ChiSquare,
    FiniteDiscrete,
    GaussianProduct,
    InputModel,
    MomentSummary,
    MultiquadricZ,
    chisq_negative_moment,
)
from meandim.theory import (
    BracketError,
    RhoVector,
    expansion_report,
    falling_factorial,
    gaussian_product_nu,
    gaussian_rho,
    moment_expansion_p,
    product_mean_dimension,
    prop_const_upper_bound,
    tau_sum_bound,
    theorem_nu_bound,
    tune_theta,
    variance_expansion,
)

from .oracles import gaussian_factor_moments, sum_pmf

RHO_SQRT2 = 0.1339745962155613532362768292470638165286  # 1 - sqrt(3)/2


def chi1(d, **kw):
    return InputModel.iid(ChiSquare(1), d).moments(**kw)


def test_product_examples():
    assert product_mean_dimension([0.37]) == pytest.approx(1.0, rel=1e-15)
    assert product_mean_dimension([0.5, 0.5]) == pytest.approx(4 / 3, rel=1e-15)
    assert product_mean_dimension([1.0] * 5) == 5.0
    with pytest.raises(ValueError):
        product_mean_dimension([0.0, 0.0])
    with pytest.raises(ValueError):
        RhoVector([0.5, 1.2])


def test_product_small_rho_limit():
    # sum(rho) / (1 - prod(1 - rho)) -> 1 + (d - 1) rho / 2 as rho -> 0
    for rho in (1e-6, 1e-10, 1e-14):
        assert product_mean_dimension([rho] * 5) == pytest.approx(1 + 2 * rho, abs=10 * rho * rho + 1e-15)


def test_rho_flags():
    r = RhoVector([0.0, 0.3, 1.0])
    assert r.zero.tolist() == [True, False, False]
    assert r.one.tolist() == [False, False, True]


@settings(max_examples=200, deadline=None)
@given(rho=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8), k=st.integers(0, 7),
       h=st.floats(1e-6, 0.2))
def test_product_monotone_in_each_rho(rho, k, h):
    k %= len(rho)
    if not any(r > 0 for r in rho):
        rho[k] = 0.5
    bumped = list(rho)
    bumped[k] = min(1.0, rho[k] + h)
    assert product_mean_dimension(bumped) >= product_mean_dimension(rho) - 1e-12


def test_gaussian_rho_examples():
    assert gaussian_rho(math.sqrt(2), 0.0) == pytest.approx(RHO_SQRT2, rel=1e-14)
    assert gaussian_rho(1e6, 0.0) < 1e-9
    assert gaussian_rho(1e-6, 0.0) > 1 - 1e-3
    assert 0 < gaussian_rho(1e9, 3.0) < 1e-15
    with pytest.raises(ValueError):
        gaussian_rho(0.0)


@pytest.mark.parametrize("theta, c", [(math.sqrt(2), 0.0), (0.3, 1.2), (5.0, -2.0), (0.05, 0.1), (1.0, 3.0)])
def test_gaussian_rho_quadrature(theta, c):
    m1, m2 = gaussian_factor_moments(theta, c)
    assert gaussian_rho(theta, c) == pytest.approx(1 - m1 * m1 / m2, rel=1e-9)


def test_gaussian_rho_finite_law():
    law = FiniteDiscrete((-1.0, 0.0, 2.0), (0.25, 0.5, 0.25))
    g = np.exp(-(np.array(law.values) - 0.3) ** 2 / 0.7 ** 2)
    p = np.array(law.probs)
    assert gaussian_rho(0.7, 0.3, law) == pytest.approx(1 - np.dot(p, g) ** 2 / np.dot(p, g * g), rel=1e-14)


def _discretized_normal(k):
    nodes, weights = np.polynomial.hermite_e.hermegauss(k)
    return FiniteDiscrete(tuple(nodes), tuple(weights / weights.sum()))


@pytest.mark.parametrize("d, k, theta", [(2, 9, 1.0), (3, 5, 0.4), (4, 7, 2.5), (6, 3, 0.8), (5, 4, 0.2)])
def test_product_formula_matches_exact_anova(d, k, theta):
    law = _discretized_normal(k)
    centers = tuple(np.linspace(-0.5, 0.7, d))
    closed = gaussian_product_nu(theta, centers, law)
    exact = exact_anova(GaussianProduct(theta, centers), InputModel.iid(law, d)).mean_dimension
    assert closed == pytest.approx(exact, rel=1e-10)


def test_tune_theta_examples():
    theta = tune_theta(2, (0.0, 0.0), 1.5, tol=1e-10)
    assert gaussian_product_nu(theta, (0.0, 0.0)) == pytest.approx(1.5, abs=1e-10)
    theta = tune_theta(10, None, 9.9, tol=1e-9)
    assert theta < 0.05
    assert abs(gaussian_product_nu(theta, (0.0,) * 10) - 9.9) <= 1e-9
    for target in (1.0, 10.0, 0.5):
        with pytest.raises(ValueError):
            tune_theta(10, None, target)


def test_tune_theta_with_centers():
    centers = (0.0, 1.0, -0.5, 2.0)
    theta = tune_theta(4, centers, 2.2, tol=1e-10)
    assert abs(gaussian_product_nu(theta, centers) - 2.2) <= 1e-10


def test_tune_theta_bracket_failure():
    # with a two-point law rho tends to 1 - P(x = c) < 1, so nu cannot reach d
    law = FiniteDiscrete((0.0, 1.0), (0.5, 0.5))
    with pytest.raises(BracketError, match="not bracketed"):
        tune_theta(3, (0.0, 0.0, 0.0), 2.9, law=law)


def test_tune_theta_warns_on_non_monotone_scan(monkeypatch):
    import meandim.theory as th

    # rho oscillating in log(theta) gives several separated crossings
    monkeypatch.setattr(th, "gaussian_rho", lambda t, c=0.0, law=None: 0.5 + 0.4 * math.sin(math.log(t)))
    with pytest.warns(UserWarning, match="not monotone"):
        theta = th.tune_theta(2, None, 2 / 1.5, tol=1e-12)
    assert 0.5 + 0.4 * math.sin(math.log(theta)) == pytest.approx(0.5, abs=1e-10)
    assert theta < 1e-8


def test_gaussian_rho_finite_law_far_center():
    law = FiniteDiscrete((0.0, 1.0, 2.0), (0.2, 0.5, 0.3))
    # tiny theta: mass concentrates on the support point nearest the center
    assert gaussian_rho(1e-4, 1.2, law) == pytest.approx(1 - 0.5, rel=1e-12)
    # equidistant from 1 and 2: m1 = m2 = 0.8 after the shift
    assert gaussian_rho(1e-4, 1.5, law) == pytest.approx(0.2, rel=1e-12)


def test_falling_factorial():
    assert falling_factorial(0.5, 0) == 1.0
    assert falling_factorial(0.5, 3) == pytest.approx(0.5 * -0.5 * -1.5)
    assert falling_factorial(2.0, 3) == 0.0


def _finite_sum_summary(values, probs, d):
    return InputModel.iid(FiniteDiscrete(values, probs), d).moments()


def test_expansions_exact_at_p_one_and_two():
    values, probs, d = (1, 2, 4), (0.5, 0.3, 0.2), 6
    s = _finite_sum_summary(values, probs, d)
    z, pmf = sum_pmf(values, probs, d)
    mu = s.mu_total
    r2 = s.sigma2_total / mu ** 2
    assert moment_expansion_p(s, 1.0) == 1.0
    assert moment_expansion_p(s, 2.0) == pytest.approx(np.dot(pmf, (z / mu) ** 2), rel=1e-14)
    assert moment_expansion_p(s, 2.0) == 1.0 + r2
    assert variance_expansion(s, 1.0) == r2
    var = np.dot(pmf, (z / mu) ** 2) - np.dot(pmf, z / mu) ** 2
    assert variance_expansion(s, 1.0) == pytest.approx(var, rel=1e-13)
    assert theorem_nu_bound(s, 1.0) == 1.0 + 0.0 * r2
    assert tau_sum_bound(s, 1 - 1e-12) == pytest.approx(r2, rel=1e-9)


def test_expansion_domains():
    s = chi1(10)
    with pytest.raises(ValueError):
        moment_expansion_p(s, 6.0)
    with pytest.raises(ValueError):
        variance_expansion(s, 1.5)
    with pytest.raises(ValueError):
        tau_sum_bound(s, 1.0)
    for p in (0.0, 1.5):
        with pytest.raises(ValueError):
            theorem_nu_bound(s, p)
    assert theorem_nu_bound(s, 0.0, allow_zero=True) == 1 + 0.5 * 2 / 10


def test_theorem_bound_examples():
    assert theorem_nu_bound(chi1(100), 0.5) == pytest.approx(1.0025, rel=1e-15)
    assert theorem_nu_bound(chi1(1000), -1.0) == pytest.approx(1.004, rel=1e-15)
    s = chi1(100)
    lead = (-1.0) ** 2 * s.sigma2_total / s.mu_total ** 2
    assert lead == pytest.approx(0.02, rel=1e-15)
    rep = expansion_report(chi1(100), -0.5)
    assert rep.nu_bound >= 1 and all(math.isfinite(v) for v in rep.row().values())


@pytest.mark.parametrize("p, d", [(0.5, 256), (-0.5, 1024)])
def test_tau_sum_bound_dominates_estimate(p, d):
    s = chi1(d)
    rep = estimate_mean_dimension_radial(MultiquadricZ(p, d, float(d)), d, 2 ** 16, 5, 17)
    se = np.std(rep.sum_tau2, ddof=1) / math.sqrt(rep.R)
    assert tau_sum_bound(s, p) >= rep.pooled_sum_tau2 - 3 * se


def test_prop_const_bound_examples():
    one = MomentSummary.iid((1, 2, 8, 60, 544, 6040), 4, alpha=1.0, M_alpha=1.0, mu_lower=1.0)
    assert prop_const_upper_bound(one, -0.7) == 1.0
    half = MomentSummary.iid((1, 2, 8, 60, 544, 6040), 4, alpha=1.0, M_alpha=2.0, mu_lower=1.0)
    assert prop_const_upper_bound(half, -1.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        prop_const_upper_bound(half, 0.5)
    small = MomentSummary.iid((1, 2, 8, 60, 544, 6040), 1, alpha=0.25, M_alpha=2.0, mu_lower=1.0)
    with pytest.raises(ValueError, match="d >="):
        prop_const_upper_bound(small, -1.0)


def test_prop_const_bound_vs_monte_carlo():
    alpha, p, d = 0.25, -0.5, 64
    s = chi1(d, alpha=alpha, M_alpha=chisq_negative_moment(1, alpha), mu_lower=1.0)
    z = np.random.default_rng(3).chisquare(d, size=10 ** 6)
    assert prop_const_upper_bound(s, p) >= np.mean((z / d) ** p)


def _central_sum_moments(values, probs, d):
    z, pmf = sum_pmf(values, probs, d)
    mu = float(np.dot(pmf, z))
    return [float(np.dot(pmf, (z / mu - 1) ** k)) for k in (2, 3, 4)]


def test_central_moment_identities():
    values, probs = (1, 2, 5), (0.6, 0.3, 0.1)
    fitted = []
    for d in (4, 8, 16):
        s = _finite_sum_summary(values, probs, d)
        mu = s.mu_total
        m2, m3, m4 = _central_sum_moments(values, probs, d)
        assert m2 == pytest.approx(s.sigma2_total / mu ** 2, rel=1e-12)
        assert m3 == pytest.approx(s.central_total(3) / mu ** 3, rel=1e-12)
        fitted.append(abs(m4 - 3 * s.sigma2_total ** 2 / mu ** 4) * d ** 3)
    C = max(fitted)
    assert min(fitted) > C / 2
    for d, c_d in zip((4, 8, 16), fitted):
        assert c_d <= C
