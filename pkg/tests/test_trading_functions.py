import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfmm import trading_functions as tf
from cfmm.errors import DomainError

from conftest import make_variants, random_reserves


def all_variants(n=3, seed=7):
    return make_variants(n, np.random.default_rng(seed))


# ---------------------------------------------------------------------------
# values


def test_sum_value():
    spec = tf.TradingFunctionSpec.sum(3)
    assert tf.value(spec, [1.0, 2.0, 3.0]) == 6.0


def test_geomean_equal_weights_constant_reserves():
    spec = tf.TradingFunctionSpec.constant_product(5)
    assert tf.value(spec, np.full(5, 3.7)) == pytest.approx(3.7, rel=1e-12)


def test_geomean_quarter_weights():
    spec = tf.TradingFunctionSpec.geometric_mean([0.25, 0.25, 0.25, 0.25])
    expected = (4.0 * 5.0 * 6.0 * 7.0) ** 0.25  # direct closed form
    assert tf.value(spec, [4.0, 5.0, 6.0, 7.0]) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(5.38357, abs=1e-5)


def test_hybrid_interpolates_between_sum_and_geomean():
    w = np.array([0.3, 0.7])
    r = np.array([2.0, 5.0])
    lo = tf.value(tf.TradingFunctionSpec.hybrid(w, 0.0), r)
    hi = tf.value(tf.TradingFunctionSpec.hybrid(w, 1.0), r)
    assert lo == pytest.approx(7.0, rel=1e-12)
    assert hi == pytest.approx(tf.value(tf.TradingFunctionSpec.geometric_mean(w), r),
                               rel=1e-12)


def test_curve_like_value_and_domain():
    spec = tf.TradingFunctionSpec.curve_like(2, 1.0)
    assert tf.value(spec, [1.0, 1.0]) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        tf.value(spec, [0.0, 1.0])


def test_geomean_zero_reserve_value_is_limit_zero():
    spec = tf.TradingFunctionSpec.geometric_mean([0.5, 0.5])
    assert tf.value(spec, [0.0, 4.0]) == 0.0
    with pytest.raises(DomainError):
        tf.gradient(spec, [0.0, 4.0])


def test_negative_reserves_rejected():
    for spec in all_variants():
        with pytest.raises(DomainError):
            tf.value(spec, [1.0, -0.1, 1.0])


# ---------------------------------------------------------------------------
# gradients


def test_linear_gradient_is_prices():
    p = np.array([1.5, 2.5, 0.5])
    spec = tf.TradingFunctionSpec.linear(p)
    np.testing.assert_allclose(tf.gradient(spec, [9.0, 1.0, 4.0]), p)


def test_geomean_gradient_closed_form():
    spec = tf.TradingFunctionSpec.geometric_mean([0.2, 0.8])
    r = np.array([1.0, 100.0])
    phi = 10.0 ** 1.6  # 1^0.2 * 100^0.8
    np.testing.assert_allclose(tf.gradient(spec, r), [0.2 * phi, 0.8 * phi / 100.0],
                               rtol=1e-12)
    assert phi == pytest.approx(39.8107, abs=1e-4)


def test_curve_like_gradient_by_hand():
    spec = tf.TradingFunctionSpec.curve_like(2, 1.0)
    np.testing.assert_allclose(tf.gradient(spec, [1.0, 1.0]), [2.0, 2.0], rtol=1e-12)


def central_difference_gradient(spec, r):
    r = np.asarray(r, dtype=float)
    h = 1e-6 * max(1.0, np.abs(r).max())
    grad = np.empty(len(r))
    for k in range(len(r)):
        e = np.zeros(len(r))
        e[k] = h
        grad[k] = (tf.value(spec, r + e) - tf.value(spec, r - e)) / (2 * h)
    return grad


def test_gradient_matches_central_differences(rng):
    for spec in make_variants(4, rng):
        for _ in range(25):
            r = random_reserves(4, rng)
            numeric = central_difference_gradient(spec, r)
            np.testing.assert_allclose(tf.gradient(spec, r), numeric, rtol=1e-6)


def test_gradient_strictly_positive(rng):
    for spec in make_variants(3, rng):
        for _ in range(50):
            assert np.all(tf.gradient(spec, random_reserves(3, rng)) > 0)


# ---------------------------------------------------------------------------
# hessians


def test_hessian_matches_gradient_differences(rng):
    for spec in make_variants(3, rng):
        r = random_reserves(3, rng, lo=1.0, hi=5.0)
        h = 1e-5
        numeric = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            numeric[:, k] = (tf.gradient(spec, r + e) - tf.gradient(spec, r - e)) / (2 * h)
        np.testing.assert_allclose(tf.hessian(spec, r), numeric, rtol=1e-5, atol=1e-8)


def test_hessian_negative_semidefinite(rng):
    for spec in make_variants(4, rng):
        for _ in range(10):
            eigs = np.linalg.eigvalsh(tf.hessian(spec, random_reserves(4, rng)))
            assert eigs.max() <= 1e-9 * (1.0 + abs(eigs.min()))


def test_gradient_hessian_pair_matches_separate_calls(rng):
    for spec in make_variants(3, rng):
        r = random_reserves(3, rng)
        g, h = tf.gradient_hessian(spec, r)
        np.testing.assert_allclose(g, tf.gradient(spec, r), rtol=1e-15)
        np.testing.assert_allclose(h, tf.hessian(spec, r), rtol=1e-15, atol=1e-18)


# ---------------------------------------------------------------------------
# structural properties


def test_homogeneity_flags():
    kinds = {spec.kind: tf.is_homogeneous(spec) for spec in all_variants()}
    assert kinds[tf.LINEAR] and kinds[tf.SUM] and kinds[tf.GEOMETRIC_MEAN]
    assert kinds[tf.HYBRID]
    assert not kinds[tf.CURVE_LIKE]


def test_midpoint_concavity(rng):
    for spec in make_variants(3, rng):
        for _ in range(1000):
            r1 = random_reserves(3, rng, lo=0.05, hi=50.0)
            r2 = random_reserves(3, rng, lo=0.05, hi=50.0)
            mid = tf.value(spec, 0.5 * (r1 + r2))
            chord = 0.5 * (tf.value(spec, r1) + tf.value(spec, r2))
            assert mid >= chord - 1e-9 * (1.0 + abs(mid))


def test_gradient_monotone_operator(rng):
    for spec in make_variants(3, rng):
        for _ in range(200):
            r1 = random_reserves(3, rng)
            r2 = random_reserves(3, rng)
            inner = (tf.gradient(spec, r2) - tf.gradient(spec, r1)) @ (r2 - r1)
            assert inner <= 1e-9 * (1.0 + abs(inner))


def test_homogeneous_scaling(rng):
    for spec in make_variants(3, rng):
        if not tf.is_homogeneous(spec):
            continue
        for _ in range(100):
            r = random_reserves(3, rng)
            a = rng.uniform(0.1, 10.0)
            v, g = tf.value(spec, r), tf.gradient(spec, r)
            assert abs(tf.value(spec, a * r) - a * v) <= 1e-10 * a * abs(v)
            assert np.abs(tf.gradient(spec, a * r) - g).max() <= 1e-8 * np.abs(g).max()


def test_euler_identity_for_homogeneous(rng):
    for spec in make_variants(4, rng):
        if not tf.is_homogeneous(spec):
            continue
        for _ in range(100):
            r = random_reserves(4, rng)
            v = tf.value(spec, r)
            assert tf.gradient(spec, r) @ r == pytest.approx(v, rel=1e-10)


def test_value_shift_matches_direct_difference(rng):
    for spec in make_variants(3, rng):
        for _ in range(100):
            base = random_reserves(3, rng, lo=1.0, hi=10.0)
            shift = rng.uniform(-0.4, 1.0, 3) * base
            direct = tf.value(spec, base + shift) - tf.value(spec, base)
            stable = tf.value_shift(spec, base, shift)
            assert stable == pytest.approx(direct, rel=1e-9, abs=1e-12)
            fast = tf.make_shift_value(spec, base)(shift)
            assert fast == stable


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=2, max_size=6),
       st.floats(0.1, 10.0))
def test_geomean_homogeneity_hypothesis(reserves, scale):
    n = len(reserves)
    spec = tf.TradingFunctionSpec.constant_product(n)
    r = np.asarray(reserves)
    assert tf.value(spec, scale * r) == pytest.approx(scale * tf.value(spec, r),
                                                      rel=1e-10)


# ---------------------------------------------------------------------------
# validation and serialization


def test_weight_validation():
    with pytest.raises(ValueError):
        tf.TradingFunctionSpec.geometric_mean([0.4, 0.4])
    with pytest.raises(ValueError):
        tf.TradingFunctionSpec.geometric_mean([1.2, -0.2])


def test_alpha_validation():
    with pytest.raises(ValueError):
        tf.TradingFunctionSpec.hybrid([0.5, 0.5], 1.5)
    with pytest.raises(ValueError):
        tf.TradingFunctionSpec.curve_like(2, 0.0)


def test_spec_dict_round_trip():
    for spec in all_variants():
        clone = tf.spec_from_dict(tf.spec_to_dict(spec))
        assert clone.kind == spec.kind and clone.n == spec.n
        for name in ("p", "w"):
            a, b = getattr(spec, name), getattr(clone, name)
            assert (a is None) == (b is None)
            if a is not None:
                np.testing.assert_array_equal(a, b)
        assert spec.alpha == clone.alpha
