import numpy as np
import pytest

from cfmm import engine, two_asset
from cfmm import trading_functions as tf
from cfmm.errors import DomainError, Infeasible

from conftest import random_state


def state_with(spec, reserves, gamma=0.997):
    labels = tuple(f"A{k}" for k in range(spec.n))
    return engine.CfmmState(labels, np.asarray(reserves, dtype=float), gamma, spec,
                            {"pool": 1.0})


def figure_pool():
    return state_with(tf.TradingFunctionSpec.geometric_mean([0.2, 0.8]), [1.0, 100.0])


def oracle_bisection(func, lo, hi, tol=1e-13, iters=300):
    """Plain bisection, independent of the production root-finding path."""
    f_lo, f_hi = func(lo), func(hi)
    assert f_lo * f_hi <= 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f_mid = func(mid)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo < tol * (1 + abs(hi)):
            break
    return 0.5 * (lo + hi)


def oracle_forward(state, i, j, delta):
    """Received amount from a scalar bisection on the acceptance residual."""
    phi0 = tf.value(state.phi, state.reserves)

    def residual(lam):
        post = state.reserves.copy()
        post[i] += state.gamma * delta
        post[j] -= lam
        return tf.value(state.phi, post) - phi0

    return oracle_bisection(residual, 0.0, (1 - 1e-12) * state.reserves[j])


# ---------------------------------------------------------------------------
# closed forms


def test_sum_forward_closed_form():
    state = state_with(tf.TradingFunctionSpec.sum(2), [10.0, 5.0])
    quote = two_asset.forward_exchange(state, 0, 1, 2.0)
    assert quote.output_amount == pytest.approx(1.994, rel=1e-12)
    assert quote.method == two_asset.CLOSED_FORM
    # saturation at the reserve bound
    assert two_asset.forward_exchange(state, 0, 1, 100.0).output_amount == 5.0


def test_forward_zero_input():
    quote = two_asset.forward_exchange(figure_pool(), 0, 1, 0.0)
    assert quote.output_amount == 0.0 and quote.realized_rate == 0.0


def test_geomean_forward_closed_form_value():
    state = figure_pool()
    quote = two_asset.forward_exchange(state, 0, 1, 1.0)
    expected = 100.0 * (1.0 - (1.0 / 1.997) ** 0.25)
    assert quote.output_amount == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(15.878, abs=1e-3)


def test_sum_reverse_closed_form():
    state = state_with(tf.TradingFunctionSpec.sum(2), [10.0, 5.0])
    quote = two_asset.reverse_exchange(state, 0, 1, 1.994)
    assert quote.output_amount == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(Infeasible):
        two_asset.reverse_exchange(state, 0, 1, 5.0)


def test_reverse_zero_input():
    assert two_asset.reverse_exchange(figure_pool(), 0, 1, 0.0).output_amount == 0.0


def test_geomean_reverse_inverts_forward_example():
    state = figure_pool()
    forward = two_asset.forward_exchange(state, 0, 1, 1.0)
    back = two_asset.reverse_exchange(state, 0, 1, forward.output_amount)
    assert back.output_amount == pytest.approx(1.0, rel=1e-10)


def test_geomean_reverse_infeasible_at_reserves():
    with pytest.raises(Infeasible):
        two_asset.reverse_exchange(figure_pool(), 0, 1, 100.0)


def test_bad_inputs():
    state = figure_pool()
    with pytest.raises(ValueError):
        two_asset.forward_exchange(state, 1, 1, 1.0)
    with pytest.raises(DomainError):
        two_asset.forward_exchange(state, 0, 1, -1.0)


# ---------------------------------------------------------------------------
# numeric paths agree with closed forms and the oracle


def test_newton_and_bisection_match_closed_forms(rng):
    for _ in range(20):
        n = 2
        w = rng.uniform(0.2, 1.0, n)
        w /= w.sum()
        specs = [tf.TradingFunctionSpec.sum(n), tf.TradingFunctionSpec.geometric_mean(w)]
        reserves = rng.uniform(1.0, 50.0, n)
        gamma = float(rng.uniform(0.9, 1.0))
        for spec in specs:
            state = state_with(spec, reserves, gamma)
            # stay below the sum function's saturation point
            for delta in np.linspace(1e-3, 0.8 * reserves[1] / gamma, 100):
                closed = two_asset.forward_exchange(state, 0, 1, float(delta))
                newton = two_asset._forward_root(state, 0, 1, float(delta))[0]
                bisect = two_asset._forward_root(state, 0, 1, float(delta),
                                                 force_bisection=True)[0]
                assert newton == pytest.approx(closed.output_amount, rel=1e-9)
                assert bisect == pytest.approx(closed.output_amount, rel=1e-9)


def test_hybrid_and_curve_quotes_match_oracle(rng):
    for _ in range(20):
        state = random_state(rng, n=2,
                             kind=rng.choice([tf.HYBRID, tf.CURVE_LIKE]))
        delta = float(rng.uniform(0.1, 1.0) * state.reserves[0])
        quote = two_asset.forward_exchange(state, 0, 1, delta)
        assert quote.output_amount == pytest.approx(oracle_forward(state, 0, 1, delta),
                                                    rel=1e-9)


def test_inverse_property_on_grids(rng):
    for _ in range(10):
        state = random_state(rng, n=2)
        r_i, r_j = state.reserves
        for delta in np.linspace(0.01, 0.5 * r_j / state.gamma, 20):
            lam = two_asset.forward_exchange(state, 0, 1, float(delta)).output_amount
            if lam >= r_j:
                continue
            back = two_asset.reverse_exchange(state, 0, 1, lam).output_amount
            assert abs(back - delta) <= 1e-8 * (1 + delta)
        for lam in np.linspace(0.01, 0.8 * r_j, 20):
            delta = two_asset.reverse_exchange(state, 0, 1, float(lam)).output_amount
            fwd = two_asset.forward_exchange(state, 0, 1, delta).output_amount
            assert abs(fwd - lam) <= 1e-8 * (1 + lam)


def test_forward_concave_reverse_convex_monotone(rng):
    for _ in range(10):
        state = random_state(rng, n=2)
        rate = engine.exchange_rate(state, 0, 1)
        # stay below the saturation point of the sum-like closed forms
        grid = np.linspace(0.0, min(state.reserves[0], 0.8 * state.reserves[1] / rate),
                           30)
        f_vals = np.array([two_asset.forward_exchange(state, 0, 1, float(d)).output_amount
                           for d in grid])
        assert np.all(np.diff(f_vals) > 0)
        second = np.diff(f_vals, 2)
        assert np.all(second <= 1e-9 * (1 + np.abs(f_vals[:-2])))
        lam_grid = np.linspace(0.0, 0.7 * state.reserves[1], 30)
        g_vals = np.array([two_asset.reverse_exchange(state, 0, 1, float(x)).output_amount
                           for x in lam_grid])
        assert np.all(np.diff(g_vals) > 0)
        assert np.all(np.diff(g_vals, 2) >= -1e-9 * (1 + np.abs(g_vals[:-2])))


def test_slope_at_zero_is_exchange_rate(rng):
    for _ in range(30):
        state = random_state(rng, n=2)
        rate = engine.exchange_rate(state, 0, 1)
        h = 1e-6 * state.reserves[0]
        lam = two_asset.forward_exchange(state, 0, 1, float(h)).output_amount
        assert abs(lam / h - rate) <= 1e-4 * rate


def test_reverse_slope_at_zero_is_inverse_rate(rng):
    # the required tender per received unit starts at 1/E_ij
    for _ in range(30):
        state = random_state(rng, n=2)
        rate = engine.exchange_rate(state, 0, 1)
        h = 1e-6 * state.reserves[1]
        delta = two_asset.reverse_exchange(state, 0, 1, float(h)).output_amount
        assert abs(delta / h - 1.0 / rate) <= 1e-4 / rate


def test_rate_bounds(rng):
    for _ in range(20):
        state = random_state(rng, n=2)
        rate = engine.exchange_rate(state, 0, 1)
        for delta in np.linspace(0.01, 2 * state.reserves[0], 25):
            quote = two_asset.forward_exchange(state, 0, 1, float(delta))
            assert quote.output_amount <= rate * delta * (1 + 1e-9)
            assert quote.realized_rate <= rate + 1e-9
        for lam in np.linspace(0.01, 0.8 * state.reserves[1], 25):
            quote = two_asset.reverse_exchange(state, 0, 1, float(lam))
            assert quote.output_amount >= lam / rate * (1 - 1e-9)


def test_newton_iterates_decrease_for_curve_like(rng):
    for _ in range(20):
        state = random_state(rng, n=2, kind=tf.CURVE_LIKE)
        trace = []
        two_asset._forward_root(state, 0, 1, float(0.4 * state.reserves[0]),
                                trace=trace)
        assert len(trace) >= 2
        assert all(a >= b - 1e-12 for a, b in zip(trace, trace[1:]))


def test_output_below_reserves_for_strictly_concave(rng):
    for _ in range(20):
        state = random_state(rng, n=2, kind=tf.GEOMETRIC_MEAN)
        quote = two_asset.forward_exchange(state, 0, 1,
                                           float(100.0 * state.reserves[0]))
        assert quote.output_amount < state.reserves[1]


# ---------------------------------------------------------------------------
# basket multiples


def test_basket_forward_reduces_to_pair_quote(rng):
    for _ in range(10):
        state = random_state(rng, n=3)
        delta = float(rng.uniform(0.1, 1.0))
        via_basket = two_asset.basket_forward(state, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
                                              delta)
        direct = two_asset.forward_exchange(state, 0, 1, delta).output_amount
        assert via_basket == pytest.approx(direct, rel=1e-10)


def test_basket_forward_zero():
    state = figure_pool()
    assert two_asset.basket_forward(state, [1.0, 0.0], [0.0, 1.0], 0.0) == 0.0


def test_basket_forward_against_oracle():
    spec = tf.TradingFunctionSpec.constant_product(4)
    state = state_with(spec, [4.0, 5.0, 6.0, 7.0])
    tender_dir = np.array([1.0, 1.0, 0.0, 0.0])
    receive_dir = np.array([0.0, 0.0, 1.0, 1.0])
    lam = two_asset.basket_forward(state, tender_dir, receive_dir, 0.5)
    phi0 = tf.value(spec, state.reserves)

    def residual(m):
        post = state.reserves + state.gamma * 0.5 * tender_dir - m * receive_dir
        return tf.value(spec, post) - phi0

    expected = oracle_bisection(residual, 0.0, 5.999)
    assert lam == pytest.approx(expected, rel=1e-9)


def test_basket_forward_rate_bound(rng):
    for _ in range(20):
        state = random_state(rng, n=4)
        tender_dir = np.array([1.0, 0.5, 0.0, 0.0])
        receive_dir = np.array([0.0, 0.0, 1.0, 0.25])
        raw = engine.unscaled_prices(state)
        rate = state.gamma * (raw @ tender_dir) / (raw @ receive_dir)
        delta = float(rng.uniform(0.05, 0.5))
        lam = two_asset.basket_forward(state, tender_dir, receive_dir, delta)
        assert lam <= rate * delta * (1 + 1e-9)


def test_basket_forward_validation():
    state = figure_pool()
    with pytest.raises(DomainError):
        two_asset.basket_forward(state, [1.0, 0.5], [0.0, 1.0], 1.0)  # overlap
    with pytest.raises(DomainError):
        two_asset.basket_forward(state, [1.0, 0.0], [0.0, 0.0], 1.0)  # empty receive


# ---------------------------------------------------------------------------
# liquidation value and purchase cost


def test_liquidation_zero_basket():
    assert two_asset.liquidation_value(figure_pool(), [0.0, 0.0]) == 0.0


def test_liquidation_sum_closed_form(rng):
    state = state_with(tf.TradingFunctionSpec.sum(3), [5.0, 5.0, 50.0])
    basket = np.array([2.0, 1.5, 0.0])
    value = two_asset.liquidation_value(state, basket)
    assert value == pytest.approx(state.gamma * basket.sum(), rel=1e-9)


def test_liquidation_bounded_by_discounted_value(rng):
    checked = 0
    while checked < 50:
        state = random_state(rng, n=4)
        basket = rng.uniform(0, 0.5, 4) * state.reserves
        basket[-1] = 0.0
        try:
            value = two_asset.liquidation_value(state, basket)
        except Infeasible:
            continue  # pool holds too little numeraire for this basket
        bound = state.gamma * (engine.prices(state) @ basket)
        assert value <= bound + 1e-9 * (1 + bound)
        checked += 1


def test_liquidation_geomean_example():
    state = state_with(tf.TradingFunctionSpec.constant_product(4), [4.0, 5.0, 6.0, 7.0])
    basket = np.array([1.0, 0.0, 0.0, 0.0])
    value = two_asset.liquidation_value(state, basket)
    phi0 = tf.value(state.phi, state.reserves)

    def residual(m):
        post = state.reserves + state.gamma * basket
        post[-1] -= m
        return tf.value(state.phi, post) - phi0

    assert value == pytest.approx(oracle_bisection(residual, 0.0, 6.999), rel=1e-9)
    assert value <= 0.997 * (7.0 / 4.0) + 1e-9


def test_liquidation_rejects_numeraire():
    with pytest.raises(DomainError):
        two_asset.liquidation_value(figure_pool(), [0.0, 1.0])


def test_purchase_zero_basket():
    assert two_asset.purchase_cost(figure_pool(), [0.0, 0.0]) == 0.0


def test_purchase_sum_closed_form():
    state = state_with(tf.TradingFunctionSpec.sum(3), [5.0, 5.0, 50.0])
    basket = np.array([2.0, 1.5, 0.0])
    cost = two_asset.purchase_cost(state, basket)
    assert cost == pytest.approx(basket.sum() / state.gamma, rel=1e-9)


def test_purchase_cost_bounded_below(rng):
    for _ in range(50):
        state = random_state(rng, n=4)
        basket = rng.uniform(0, 0.7, 4) * state.reserves
        basket[-1] = 0.0
        cost = two_asset.purchase_cost(state, basket)
        bound = (engine.prices(state) @ basket) / state.gamma
        assert cost >= bound - 1e-9 * (1 + bound)


def test_purchase_infeasible_beyond_reserves():
    state = state_with(tf.TradingFunctionSpec.constant_product(4), [4.0, 5.0, 6.0, 7.0])
    with pytest.raises(Infeasible):
        two_asset.purchase_cost(state, [4.0, 0.0, 0.0, 0.0])


def test_purchase_geomean_matches_oracle():
    state = state_with(tf.TradingFunctionSpec.constant_product(4), [4.0, 5.0, 6.0, 7.0])
    basket = np.array([2.0, 4.0, 0.0, 0.0])
    cost = two_asset.purchase_cost(state, basket)
    phi0 = tf.value(state.phi, state.reserves)

    def residual(m):
        post = state.reserves - basket
        post[-1] += state.gamma * m
        return tf.value(state.phi, post) - phi0

    assert cost == pytest.approx(oracle_bisection(residual, 0.0, 1000.0), rel=1e-8)
