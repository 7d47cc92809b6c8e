"""Pool state plus the rules for trades, prices and liquidity changes.

States are immutable values; every mutating operation returns a new state.
Callers sharing a live pool must serialize writes themselves.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import trading_functions as tf
from .errors import (
    DimensionError,
    DomainError,
    InsufficientShare,
    InvalidLiquidityBasket,
    NegativeReserves,
    NoValidScale,
    RejectedTrade,
    SlippageExceeded,
)
from .rootfind import newton_bracketed

ADD = "add"
REMOVE = "remove"

#: relative spread of componentwise gradient ratios tolerated by the
#: price-preservation check for liquidity changes
COLLINEARITY_RTOL = 1e-8


def acceptance_tolerance(phi_before):
    """Surplus tolerance for accepting a trade; scales with the function value."""
    return 1e-9 * (1.0 + abs(phi_before))


@dataclass(frozen=True, eq=False)
class CfmmState:
    """Labeled reserves, fee parameter, trading function and provider weights.

    The last asset is the numeraire.  Provider weights, when present, are
    nonnegative and sum to one.
    """

    assets: tuple
    reserves: np.ndarray
    gamma: float
    phi: tf.TradingFunctionSpec
    providers: dict = field(default_factory=dict)

    def __post_init__(self):
        assets = tuple(str(a) for a in self.assets)
        if len(assets) != len(set(assets)):
            raise ValueError("asset labels must be unique")
        r = np.array(self.reserves, dtype=float)
        if len(assets) < 2 or self.phi.n != len(assets):
            raise DimensionError("asset labels must match the trading function size")
        if r.shape != (self.phi.n,):
            raise DimensionError("reserve vector length must equal the asset count")
        if np.any(r < 0):
            raise ValueError("reserves must be nonnegative")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("fee parameter must lie in (0, 1]")
        providers = {str(k): float(v) for k, v in self.providers.items()}
        if providers:
            weights = np.array(list(providers.values()))
            if np.any(weights < 0):
                raise ValueError("provider weights must be nonnegative")
            if abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError("provider weights must sum to one")
        r.flags.writeable = False
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "reserves", r)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "providers", providers)

    @property
    def n(self):
        return self.phi.n

    def asset_index(self, label):
        try:
            return self.assets.index(str(label))
        except ValueError:
            raise KeyError(f"unknown asset {label!r}") from None


@dataclass(frozen=True, eq=False)
class Trade:
    """A proposed exchange: basket tendered to the pool and basket received."""

    tender: np.ndarray
    receive: np.ndarray

    def __post_init__(self):
        d = np.array(self.tender, dtype=float)
        l = np.array(self.receive, dtype=float)
        if d.shape != l.shape or d.ndim != 1:
            raise DimensionError("tender and receive baskets must be vectors of equal length")
        if np.any(d < 0) or np.any(l < 0):
            raise ValueError("trade baskets must be nonnegative")
        d.flags.writeable = False
        l.flags.writeable = False
        object.__setattr__(self, "tender", d)
        object.__setattr__(self, "receive", l)

    @property
    def is_canonical(self):
        """True when no asset appears in both baskets."""
        return not np.any((self.tender > 0) & (self.receive > 0))

    @property
    def net(self):
        """Change in the trader's holdings: receive - tender."""
        return self.receive - self.tender

    @property
    def is_zero(self):
        return not (np.any(self.tender) or np.any(self.receive))


def zero_trade(n):
    return Trade(np.zeros(n), np.zeros(n))


REASON_OK = "ok"
REASON_RECEIVE_EXCEEDS_RESERVES = "receive_exceeds_reserves"
REASON_NEGATIVE_RESERVES = "negative_reserves"
REASON_FUNCTION_DECREASE = "function_decrease"


@dataclass(frozen=True)
class AcceptanceReport:
    """Outcome of the trade acceptance check.

    surplus is the discounted post-trade function value minus the current
    one; a trade is accepted when it is nonnegative up to the acceptance
    tolerance and the receive basket fits in the reserves.
    """

    accepted: bool
    phi_before: float
    phi_after_discounted: float
    surplus: float
    reason: str


@dataclass(frozen=True)
class LiquidityCheck:
    """Outcome of the price-preservation check for a reserve change.

    alpha is the common scale of the post-change gradient relative to the
    current one; spread is the max-minus-min of the componentwise ratios.
    """

    valid: bool
    alpha: float
    spread: float


def canonicalize_trade(trade, gamma):
    """Strip overlapping tender/receive amounts without changing the pool effect.

    For each asset held in both baskets, the smaller side (after the fee
    discount) is cancelled; the trader's net holdings never get worse.
    """
    d = np.array(trade.tender)
    l = np.array(trade.receive)
    overlap = (d > 0) & (l > 0)
    if np.any(overlap):
        # the cancelled side is zeroed exactly so the result is truly disjoint
        tender_cancelled = overlap & (gamma * d <= l)
        receive_cancelled = overlap & ~tender_cancelled
        l[tender_cancelled] -= gamma * d[tender_cancelled]
        d[tender_cancelled] = 0.0
        d[receive_cancelled] -= l[receive_cancelled] / gamma
        l[receive_cancelled] = 0.0
        d[d < 0] = 0.0
        l[l < 0] = 0.0
    return Trade(d, l)


def check_trade(state, trade):
    """Evaluate the acceptance condition for a proposed trade; no state change."""
    if trade.tender.shape != (state.n,):
        raise DimensionError("trade baskets must match the pool's asset count")
    phi0 = tf.value(state.phi, state.reserves)
    if np.any(trade.receive > state.reserves):
        return AcceptanceReport(False, phi0, float("nan"), float("nan"),
                                REASON_RECEIVE_EXCEEDS_RESERVES)
    discounted = state.reserves + state.gamma * trade.tender - trade.receive
    if np.any(discounted < 0):
        return AcceptanceReport(False, phi0, float("nan"), float("nan"),
                                REASON_NEGATIVE_RESERVES)
    phi1 = tf.value(state.phi, discounted)
    surplus = phi1 - phi0
    if surplus >= -acceptance_tolerance(phi0):
        return AcceptanceReport(True, phi0, phi1, surplus, REASON_OK)
    return AcceptanceReport(False, phi0, phi1, surplus, REASON_FUNCTION_DECREASE)


def execute_trade(state, trade):
    """Apply an accepted trade; the full tender enters the reserves."""
    report = check_trade(state, trade)
    if not report.accepted:
        raise RejectedTrade(report)
    new_reserves = state.reserves + trade.tender - trade.receive
    return replace(state, reserves=new_reserves)


def unscaled_prices(state):
    """Gradient of the trading function at the current reserves."""
    return tf.gradient(state.phi, state.reserves)


def prices(state):
    """Asset prices relative to the numeraire (last asset, price exactly 1)."""
    raw = unscaled_prices(state)
    p = raw / raw[-1]
    p[-1] = 1.0
    return p


def exchange_rate(state, i, j):
    """Marginal amount of asset j received per unit of asset i tendered."""
    if i == j:
        raise ValueError("exchange rate needs two distinct assets")
    raw = unscaled_prices(state)
    return state.gamma * raw[i] / raw[j]


def reserve_value(state):
    """Total reserve value in numeraire units at the current prices."""
    return float(prices(state) @ state.reserves)


def check_liquidity_change(state, basket, direction):
    """Test whether adding/removing the basket leaves all prices unchanged.

    Valid changes scale the gradient uniformly; the returned alpha is that
    scale (< 1 for additions, > 1 for removals, exactly 1 along rays of a
    homogeneous function).
    """
    psi = np.asarray(basket, dtype=float)
    if psi.shape != (state.n,):
        raise DimensionError("liquidity basket must match the pool's asset count")
    if np.any(psi < 0):
        raise DomainError("liquidity basket must be nonnegative")
    if direction == ADD:
        new_reserves = state.reserves + psi
    elif direction == REMOVE:
        if np.any(psi > state.reserves):
            raise NegativeReserves("cannot remove more than the pool holds")
        new_reserves = state.reserves - psi
    else:
        raise ValueError(f"direction must be {ADD!r} or {REMOVE!r}")
    g_old = tf.gradient(state.phi, state.reserves)
    g_new = tf.gradient(state.phi, new_reserves)
    ratios = g_new / g_old
    alpha = float(ratios.mean())
    spread = float(ratios.max() - ratios.min())
    return LiquidityCheck(spread <= COLLINEARITY_RTOL * alpha, alpha, spread)


def execute_liquidity_change(state, provider, basket, direction):
    """Apply a valid liquidity change and rescale all provider weights pro rata."""
    check = check_liquidity_change(state, basket, direction)
    if not check.valid:
        raise InvalidLiquidityBasket(
            f"basket changes relative prices (gradient ratio spread {check.spread:.3g})")
    psi = np.asarray(basket, dtype=float)
    return apply_signed_liquidity(state, provider, psi if direction == ADD else -psi)


def apply_signed_liquidity(state, provider, signed_basket):
    """Apply a price-preserving reserve change with entries of either sign.

    Mixed-sign baskets arise from the liquidity provision problem on
    non-homogeneous trading functions; the provider weight update only
    depends on the change in pool value.
    """
    signed = np.asarray(signed_basket, dtype=float)
    if signed.shape != (state.n,):
        raise DimensionError("liquidity basket must match the pool's asset count")
    new_reserves = state.reserves + signed
    if np.any(new_reserves < 0):
        raise NegativeReserves("cannot remove more than the pool holds")
    g_old = tf.gradient(state.phi, state.reserves)
    g_new = tf.gradient(state.phi, new_reserves)
    ratios = g_new / g_old
    alpha = float(ratios.mean())
    spread = float(ratios.max() - ratios.min())
    if spread > COLLINEARITY_RTOL * alpha:
        raise InvalidLiquidityBasket(
            f"basket changes relative prices (gradient ratio spread {spread:.3g})")
    if not state.providers:
        raise InvalidLiquidityBasket("pool has no provider table")
    p = prices(state)
    value_before = float(p @ state.reserves)
    value_after = value_before + float(p @ signed)
    if value_after <= 0:
        raise InvalidLiquidityBasket("change would remove the entire pool value")
    scale = value_before / value_after
    gained = (value_after - value_before) / value_after
    provider = str(provider)
    new_weight = state.providers.get(provider, 0.0) * scale + gained
    if new_weight < -1e-12:
        raise InsufficientShare(
            f"provider {provider!r} holds too small a share for this removal")
    weights = {pid: w * scale for pid, w in state.providers.items() if pid != provider}
    weights[provider] = max(new_weight, 0.0)
    weights = {pid: w for pid, w in weights.items() if w > 0.0}
    return replace(state, reserves=new_reserves, providers=weights)


def execute_trade_with_slippage(state, trade, eta):
    """Execute (tender, a * receive) at the unique balancing scale a.

    The scale solves the acceptance condition exactly; the trade fails when
    a < eta (too much slippage) or when no nonnegative scale keeps the
    reserves balanced.  Returns (new_state, a).
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("slippage threshold must lie in [0, 1]")
    if trade.tender.shape != (state.n,):
        raise DimensionError("trade baskets must match the pool's asset count")
    if not np.any(trade.receive > 0):
        raise DomainError("slippage execution needs a nonzero receive basket")
    phi0 = tf.value(state.phi, state.reserves)
    base = state.reserves + state.gamma * trade.tender
    support = trade.receive > 0
    scale_cap = float(np.min(base[support] / trade.receive[support]))
    hi = (1.0 - 1e-12) * scale_cap

    def residual(a):
        return tf.value(state.phi, base - a * trade.receive) - phi0

    def slope(a):
        return -float(trade.receive @ tf.gradient(state.phi, base - a * trade.receive))

    if residual(hi) > 0:
        raise NoValidScale("receive basket exceeds what the reserves can balance")
    ftol = 1e-12 * (1.0 + abs(phi0))
    alpha, _, _ = newton_bracketed(residual, slope, 1.0, 0.0, hi, ftol)
    if alpha < eta:
        raise SlippageExceeded(alpha, eta)
    new_state = execute_trade(state, Trade(trade.tender, alpha * trade.receive))
    return new_state, alpha


def max_liquidity_clip(state, psi_max):
    """Largest valid liquidity addition bounded above by psi_max.

    Returns (accepted_basket, remainder).  With constant prices any basket
    works; homogeneous functions accept the largest in-proportion multiple
    of the reserves; otherwise the price-preserving basket is found by
    bisecting on the budget of the liquidity provision problem.
    """
    psi_max = np.asarray(psi_max, dtype=float)
    if psi_max.shape != (state.n,):
        raise DimensionError("basket must match the pool's asset count")
    if np.any(psi_max < 0):
        raise DomainError("basket must be nonnegative")
    if not np.any(psi_max > 0):
        return np.zeros(state.n), np.zeros(state.n)
    if state.phi.kind in (tf.LINEAR, tf.SUM):
        return psi_max.copy(), np.zeros(state.n)
    if tf.is_homogeneous(state.phi):
        support = state.reserves > 0
        nu = float(np.min(psi_max[support] / state.reserves[support]))
        accepted = nu * state.reserves
        remainder = np.maximum(psi_max - accepted, 0.0)
        return accepted, remainder
    return _clip_by_budget_search(state, psi_max)


def _clip_by_budget_search(state, psi_max):
    # non-homogeneous case: largest budget M whose optimal basket fits under psi_max
    from .solver import solve_liquidity_problem

    p = prices(state)

    def basket_for(budget):
        psi, _, _ = solve_liquidity_problem(state, budget)
        return psi

    lo, hi = 0.0, float(p @ psi_max)
    best = np.zeros(state.n)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        psi = basket_for(mid)
        if np.all(psi <= psi_max):
            best, lo = psi, mid
        else:
            hi = mid
        if hi - lo <= 1e-9 * (1.0 + hi):
            break
    # the price-preserving basket of a non-homogeneous pool may have
    # negative entries; the remainder reports the unused headroom
    return best, np.maximum(psi_max - best, 0.0)
