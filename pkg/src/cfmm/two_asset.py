"""Swap quoting for asset pairs and fixed basket directions.

The forward direction answers "how much of asset j do I get for delta of
asset i", the reverse direction "how much of asset i buys me lam of asset
j".  Sum, linear and geometric-mean pools have closed forms; the other
variants are solved with the bracketed Newton iteration

    lam_{k+1} = lam_k + residual(lam_k) / d_phi_j(lam_k),

started from the exchange-rate prediction, which converges monotonically.
"""

from dataclasses import dataclass

import numpy as np

from . import engine
from . import trading_functions as tf
from .errors import DimensionError, DomainError, Infeasible
from .rootfind import grow_bracket, newton_bracketed

CLOSED_FORM = "closed_form"
NEWTON = "newton"
BISECTION = "bisection"


@dataclass(frozen=True)
class ExchangeQuote:
    """A priced swap: input_amount is the quantity the caller fixed
    (tendered amount for forward quotes, desired amount for reverse quotes),
    output_amount the quantity solved for, realized_rate their ratio."""

    input_amount: float
    output_amount: float
    realized_rate: float
    method: str
    iterations: int


def _root_tolerance(phi0):
    # near the evaluation noise floor; the step-size stop of the root
    # finders then resolves quotes to full relative precision
    return 4e-16 * (1.0 + abs(phi0))


def _check_pair(state, i, j):
    if i == j:
        raise ValueError("swap needs two distinct assets")
    if not (0 <= i < state.n and 0 <= j < state.n):
        raise DimensionError("asset index out of range")
    if np.any(state.reserves <= 0):
        raise DomainError("quotes require strictly positive reserves")


def forward_exchange(state, i, j, delta):
    """Amount of asset j received for tendering delta of asset i."""
    _check_pair(state, i, j)
    if delta < 0:
        raise DomainError("tendered amount must be nonnegative")
    if delta == 0:
        return ExchangeQuote(0.0, 0.0, 0.0, CLOSED_FORM, 0)
    r_i, r_j = state.reserves[i], state.reserves[j]
    kind = state.phi.kind
    if kind in (tf.SUM, tf.LINEAR):
        raw = tf.gradient(state.phi, state.reserves)
        lam = min(state.gamma * delta * raw[i] / raw[j], r_j)
        return ExchangeQuote(delta, lam, lam / delta, CLOSED_FORM, 0)
    if kind == tf.GEOMETRIC_MEAN:
        exponent = state.phi.w[i] / state.phi.w[j]
        lam = -r_j * np.expm1(exponent * (np.log(r_i) - np.log(r_i + state.gamma * delta)))
        return ExchangeQuote(delta, float(lam), float(lam) / delta, CLOSED_FORM, 0)
    lam, iters, method = _forward_root(state, i, j, delta)
    return ExchangeQuote(delta, lam, lam / delta, method, iters)


def _forward_root(state, i, j, delta, force_bisection=False, trace=None):
    """Numerically invert the acceptance condition for the received amount."""
    phi0 = tf.value(state.phi, state.reserves)
    base = state.reserves + state.gamma * delta * _unit(state.n, i)

    def residual(lam):
        post = base.copy()
        post[j] -= lam
        return tf.value(state.phi, post) - phi0

    def slope(lam):
        post = base.copy()
        post[j] -= lam
        return -tf.gradient(state.phi, post)[j]

    hi = (1.0 - 1e-12) * state.reserves[j]
    f_hi = residual(hi)
    if f_hi > 0:
        # even draining asset j cannot balance the tender: quote the full
        # reserve, the saturation value of the sum-like closed forms
        return float(state.reserves[j]), 0, BISECTION
    ftol = _root_tolerance(phi0)
    # the received amount never exceeds the exchange-rate prediction
    cap = delta * engine.exchange_rate(state, i, j)
    if cap < hi:
        f_cap = residual(cap)
        if f_cap <= 0:
            hi, f_hi = cap, f_cap
    if force_bisection:
        from .rootfind import bisect

        lam, iters = bisect(residual, 0.0, hi, ftol, f_hi=f_hi)
        return lam, iters, BISECTION
    lam, iters, method = newton_bracketed(residual, slope, min(cap, hi), 0.0, hi, ftol,
                                          trace=trace)
    return lam, iters, method


def reverse_exchange(state, i, j, lam):
    """Amount of asset i that must be tendered to receive lam of asset j."""
    _check_pair(state, i, j)
    if lam < 0:
        raise DomainError("received amount must be nonnegative")
    if lam == 0:
        return ExchangeQuote(0.0, 0.0, 0.0, CLOSED_FORM, 0)
    r_i, r_j = state.reserves[i], state.reserves[j]
    if lam >= r_j:
        raise Infeasible(f"cannot receive {lam:.6g}; reserves hold {r_j:.6g}")
    kind = state.phi.kind
    if kind in (tf.SUM, tf.LINEAR):
        raw = tf.gradient(state.phi, state.reserves)
        delta = lam * raw[j] / (state.gamma * raw[i])
        return ExchangeQuote(lam, float(delta), float(delta) / lam, CLOSED_FORM, 0)
    if kind == tf.GEOMETRIC_MEAN:
        exponent = state.phi.w[j] / state.phi.w[i]
        delta = r_i / state.gamma * np.expm1(exponent * (np.log(r_j) - np.log(r_j - lam)))
        return ExchangeQuote(lam, float(delta), float(delta) / lam, CLOSED_FORM, 0)
    delta, iters, method = _reverse_root(state, i, j, lam, force_bisection=False)
    return ExchangeQuote(lam, delta, delta / lam, method, iters)


def _reverse_root(state, i, j, lam, force_bisection=False):
    phi0 = tf.value(state.phi, state.reserves)
    base = state.reserves - lam * _unit(state.n, j)
    e_i = _unit(state.n, i)

    def residual(delta):
        return tf.value(state.phi, base + state.gamma * delta * e_i) - phi0

    def slope(delta):
        return state.gamma * tf.gradient(state.phi, base + state.gamma * delta * e_i)[i]

    start = lam / engine.exchange_rate(state, i, j)
    hi, _ = grow_bracket(residual, max(start, 1e-12 * state.reserves[i]))
    ftol = _root_tolerance(phi0)
    if force_bisection:
        from .rootfind import bisect

        delta, iters = bisect(residual, 0.0, hi, ftol)
        return delta, iters, BISECTION
    return newton_bracketed(residual, slope, start, 0.0, hi, ftol)


def basket_forward(state, tender_dir, receive_dir, delta):
    """Receive-scale lam such that (delta * tender_dir, lam * receive_dir) balances."""
    t = np.asarray(tender_dir, dtype=float)
    v = np.asarray(receive_dir, dtype=float)
    if t.shape != (state.n,) or v.shape != (state.n,):
        raise DimensionError("baskets must match the pool's asset count")
    if np.any(t < 0) or np.any(v < 0):
        raise DomainError("basket directions must be nonnegative")
    if np.any((t > 0) & (v > 0)):
        raise DomainError("tender and receive directions must not overlap")
    if not np.any(v > 0):
        raise DomainError("receive direction must be nonzero")
    if delta < 0:
        raise DomainError("tendered scale must be nonnegative")
    if delta == 0:
        return 0.0
    return _receive_scale(state, state.gamma * delta * t, v)


def _receive_scale(state, added, receive_dir):
    """Solve value(reserves + added - m * receive_dir) = value(reserves) for m."""
    phi0 = tf.value(state.phi, state.reserves)
    base = state.reserves + added
    support = receive_dir > 0
    cap = float(np.min(base[support] / receive_dir[support]))
    hi = (1.0 - 1e-12) * cap

    def residual(m):
        return tf.value(state.phi, base - m * receive_dir) - phi0

    def slope(m):
        return -float(receive_dir @ tf.gradient(state.phi, base - m * receive_dir))

    if residual(hi) > 0:
        raise Infeasible("reserves cannot balance this tender at any receive scale")
    m, _, _ = newton_bracketed(residual, slope, min(1.0, hi), 0.0, hi, _root_tolerance(phi0))
    return float(m)


def liquidation_value(state, basket):
    """Numeraire received for tendering the basket (numeraire entry zero)."""
    d = np.asarray(basket, dtype=float)
    if d.shape != (state.n,):
        raise DimensionError("basket must match the pool's asset count")
    if np.any(d < 0):
        raise DomainError("basket must be nonnegative")
    if d[-1] != 0:
        raise DomainError("the liquidated basket must not contain the numeraire")
    if not np.any(d > 0):
        return 0.0
    return _receive_scale(state, state.gamma * d, _unit(state.n, state.n - 1))


def purchase_cost(state, basket):
    """Numeraire that must be tendered to receive the basket (numeraire entry zero)."""
    l = np.asarray(basket, dtype=float)
    if l.shape != (state.n,):
        raise DimensionError("basket must match the pool's asset count")
    if np.any(l < 0):
        raise DomainError("basket must be nonnegative")
    if l[-1] != 0:
        raise DomainError("the purchased basket must not contain the numeraire")
    if not np.any(l > 0):
        return 0.0
    support = l > 0
    if np.any(l[support] >= state.reserves[support]):
        raise Infeasible("cannot purchase an entire reserve")
    phi0 = tf.value(state.phi, state.reserves)
    base = state.reserves - l
    e_n = _unit(state.n, state.n - 1)

    def residual(m):
        return tf.value(state.phi, base + state.gamma * m * e_n) - phi0

    def slope(m):
        return state.gamma * tf.gradient(state.phi, base + state.gamma * m * e_n)[-1]

    start = float(engine.prices(state) @ l) / state.gamma
    hi, _ = grow_bracket(residual, max(start, 1e-12 * state.reserves[-1]))
    m, _, _ = newton_bracketed(residual, slope, start, 0.0, hi, _root_tolerance(phi0))
    return float(m)


def _unit(n, k):
    e = np.zeros(n)
    e[k] = 1.0
    return e
