import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meandim.anova import (
    DegenerateVarianceError,
    GridTooLargeError,
    conditional_variance_index,
    decompose,
    exact_anova,
    exact_jansen_check,
    exact_total_index,
    finite_inputs,
    grid_values,
)
from meandim.model import (
    FiniteDiscrete,
    GaussianProduct,
    InputModel,
    Keister,
    MultiquadricZ,
    SyntheticAdditive,
    SyntheticProduct,
)

# nu for MultiquadricZ(p=1/2, d=2, mu=3) with z_j uniform on {1, 2}, by hand
# over the four outcomes
MQZ_D2_NU = 1.0036133695180187


def moebius_components(values, weights):
    """Literal inclusion-exclusion over conditional means, subset by subset."""
    d = values.ndim

    def cond_mean(v):
        t = values
        for j in reversed(range(d)):
            if j not in v:
                t = np.tensordot(t, weights[j], axes=([j], [0]))
                t = np.expand_dims(t, j)
        return np.broadcast_to(t, values.shape)

    effects = {}
    for size in range(d + 1):
        for u in itertools.combinations(range(d), size):
            f_u = np.zeros(values.shape)
            for k in range(len(u) + 1):
                for v in itertools.combinations(u, k):
                    f_u = f_u + (-1) ** (len(u) - k) * cond_mean(set(v))
            effects[sum(1 << j for j in u)] = f_u
    w = weights[0]
    for wj in weights[1:]:
        w = np.multiply.outer(w, wj)
    comps = np.array([float(np.sum(w * effects[m] ** 2)) if m else 0.0 for m in range(1 << d)])
    return comps, effects, w


def instances():
    rng = np.random.default_rng(11)
    yield SyntheticAdditive(2), finite_inputs((-1, 1), (-1, 1))
    yield SyntheticProduct(3), finite_inputs((-1, 1), (-1, 1), (-1, 1))
    yield MultiquadricZ(0.5, 2, 3.0), finite_inputs((1, 2), (1, 2))
    yield MultiquadricZ(-1.0, 3, 4.5), finite_inputs((0.5, 1, 3), (1, 2), (0.2, 0.9, 1.1, 4))
    yield Keister(3), finite_inputs((-1.5, 0, 0.5), (-2, 1), (0.3, 1.7))
    yield GaussianProduct(0.8, (0.2, -0.4, 0.0)), InputModel((
        FiniteDiscrete((-1.0, 0.0, 1.5), (0.2, 0.5, 0.3)),
        FiniteDiscrete.uniform(tuple(rng.normal(size=4))),
        FiniteDiscrete((-0.5, 0.5), (0.9, 0.1)),
    ))
    yield SyntheticAdditive(4), finite_inputs((0, 1, 3), (2, 5), (-1, 1), (0, 1, 2, 3))


INSTANCES = list(instances())


def test_additive_example():
    res = exact_anova(SyntheticAdditive(2), finite_inputs((-1, 1), (-1, 1)))
    assert res.component([0]) == pytest.approx(1.0)
    assert res.component([1]) == pytest.approx(1.0)
    assert res.component([0, 1]) == pytest.approx(0.0, abs=1e-15)
    assert res.mean_dimension == pytest.approx(1.0)
    assert exact_total_index(res, 0) == pytest.approx(1.0)
    assert exact_jansen_check(SyntheticAdditive(2), finite_inputs((-1, 1), (-1, 1)), 0) == pytest.approx(1.0)


def test_product_example():
    inputs = finite_inputs((-1, 1), (-1, 1))
    res = exact_anova(SyntheticProduct(2), inputs)
    assert res.component([0, 1]) == pytest.approx(1.0)
    assert res.component([0]) == pytest.approx(0.0, abs=1e-15)
    assert res.mean_dimension == pytest.approx(2.0)
    assert exact_total_index(res, 0) == pytest.approx(1.0) == res.variance
    assert exact_jansen_check(SyntheticProduct(2), inputs, 0) == pytest.approx(1.0)


def test_multiquadric_z_example():
    spec, inputs = MultiquadricZ(0.5, 2, 3.0), finite_inputs((1, 2), (1, 2))
    res = exact_anova(spec, inputs)
    assert res.mean_dimension == pytest.approx(MQZ_D2_NU, rel=1e-12)
    tau1 = exact_total_index(res, 0)
    assert tau1 == pytest.approx(res.component([0]) + res.component([0, 1]), rel=1e-14)
    assert exact_jansen_check(spec, inputs, 0) == pytest.approx(tau1, rel=1e-10)


@pytest.mark.parametrize("spec, inputs", INSTANCES)
def test_matches_literal_moebius(spec, inputs):
    values, weights = grid_values(spec, inputs)
    comps, _, _ = moebius_components(values, weights)
    res = exact_anova(spec, inputs)
    np.testing.assert_allclose(res.components, comps, rtol=1e-9, atol=1e-12 * res.variance)


@pytest.mark.parametrize("spec, inputs", INSTANCES)
def test_invariants(spec, inputs):
    res = exact_anova(spec, inputs)
    assert np.all(res.components >= 0)
    assert res.components.sum() == pytest.approx(res.variance, rel=1e-10)
    taus = [exact_total_index(res, j) for j in range(res.d)]
    assert res.mean_dimension == pytest.approx(sum(taus) / res.variance, rel=1e-10)
    for j in range(res.d):
        jansen = exact_jansen_check(spec, inputs, j)
        cond = conditional_variance_index(spec, inputs, j)
        assert jansen == pytest.approx(taus[j], rel=1e-10, abs=1e-14 * res.variance)
        assert cond == pytest.approx(taus[j], rel=1e-10, abs=1e-14 * res.variance)
    assert res.nonadditive_fraction <= res.mean_dimension - 1 + 1e-10


@pytest.mark.parametrize("spec, inputs", INSTANCES)
def test_orthogonality_and_reconstruction(spec, inputs):
    values, weights = grid_values(spec, inputs)
    mean, variance, comps, effects = decompose(values, weights, keep_effects=True)
    d = values.ndim
    w = weights[0]
    for wj in weights[1:]:
        w = np.multiply.outer(w, wj)

    def full(mask):
        # effect tensor has axes only for coordinates in mask
        t = np.asarray(effects[mask])
        for j in range(d):
            if not mask >> j & 1:
                t = np.expand_dims(t, j)
        return np.broadcast_to(t, values.shape)

    fulls = {m: full(m) for m in range(1 << d)}
    np.testing.assert_allclose(sum(fulls.values()), values, rtol=1e-10, atol=1e-12)
    for a in range(1, 1 << d):
        for b in range(a + 1, 1 << d):
            assert abs(np.sum(w * fulls[a] * fulls[b])) <= 1e-9 * variance


def test_lower_and_upper_indices():
    res = exact_anova(*INSTANCES[3])
    assert res.lower_index([0, 1]) == pytest.approx(res.component([0]) + res.component([1]) + res.component([0, 1]))
    assert res.upper_index([2]) == pytest.approx(exact_total_index(res, 2))
    assert res.lower_index(range(3)) == pytest.approx(res.variance)


def test_degenerate_coordinate():
    spec = SyntheticAdditive(3)
    res = exact_anova(spec, InputModel((FiniteDiscrete.uniform((1.0, 2.0)), FiniteDiscrete((4.0,), (1.0,)),
                                        FiniteDiscrete.uniform((0.0, 3.0)))))
    assert res.component([1]) == 0.0
    assert exact_total_index(res, 1) == 0.0
    assert res.mean_dimension == pytest.approx(1.0)


def test_errors():
    with pytest.raises(DegenerateVarianceError):
        exact_anova(SyntheticAdditive(2), finite_inputs((1.0,), (2.0,)))
    with pytest.raises(GridTooLargeError):
        exact_anova(SyntheticAdditive(2), finite_inputs(range(10), range(10)), max_grid=50)
    with pytest.raises(GridTooLargeError):
        exact_anova(SyntheticAdditive(21), finite_inputs(*[(0, 1)] * 21))
    with pytest.raises(IndexError):
        exact_total_index(exact_anova(*INSTANCES[0]), 2)
    with pytest.raises(TypeError):
        from meandim.model import StandardNormal

        exact_anova(SyntheticAdditive(1), InputModel((StandardNormal(),)))
    with pytest.raises(ValueError):
        exact_anova(SyntheticAdditive(3), finite_inputs((0, 1), (0, 1)))


@settings(max_examples=25, deadline=None)
@given(data=st.data(), d=st.integers(1, 4))
def test_random_tables_against_moebius(data, d):
    sizes = [data.draw(st.integers(1, 3)) for _ in range(d)]
    weights = []
    for s in sizes:
        raw = np.array(data.draw(st.lists(st.floats(0.05, 1.0), min_size=s, max_size=s)))
        weights.append(raw / raw.sum())
    values = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=int(np.prod(sizes)),
                                         max_size=int(np.prod(sizes))))).reshape(sizes)
    _, variance, comps = decompose(values, weights)
    ref, _, _ = moebius_components(values, weights)
    np.testing.assert_allclose(comps, ref, rtol=1e-8, atol=1e-10 * max(variance, 1e-12) + 1e-13)
    assert comps.sum() == pytest.approx(variance, rel=1e-9, abs=1e-12)
