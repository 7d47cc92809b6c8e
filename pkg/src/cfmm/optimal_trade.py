"""Trader utility models and the utility-maximizing trade entry point."""

from dataclasses import dataclass

import numpy as np

from . import engine, solver
from .errors import DimensionError, DomainError

LINEAR = "linear"
MARKOWITZ = "markowitz"
EXPECTED_UTILITY = "expected_utility"

PSI_LOG = "log"
PSI_POWER = "power"
PSI_NEG_EXP = "neg_exp"


@dataclass(frozen=True, eq=False)
class UtilitySpec:
    """One of three trader utility models over the net holdings change z.

    linear            pi @ z for private prices pi
    markowitz         risk-adjusted return of the post-trade holdings
                      z_curr + z with mean mu, covariance sigma, aversion kappa
    expected_utility  sample average of psi(r @ (z_curr + z)) over return rows
                      r, with psi one of log, power (exponent < 1, nonzero)
                      or negated exponential (rate > 0)
    """

    kind: str
    pi: np.ndarray = None
    z_curr: np.ndarray = None
    mu: np.ndarray = None
    sigma: np.ndarray = None
    kappa: float = None
    return_samples: np.ndarray = None
    psi_kind: str = None
    psi_param: float = None

    def __post_init__(self):
        if self.kind == LINEAR:
            pi = np.asarray(self.pi, dtype=float)
            if pi.ndim != 1 or np.any(pi <= 0):
                raise ValueError("private prices must be a strictly positive vector")
            object.__setattr__(self, "pi", pi)
        elif self.kind == MARKOWITZ:
            z = np.asarray(self.z_curr, dtype=float)
            mu = np.asarray(self.mu, dtype=float)
            sigma = np.asarray(self.sigma, dtype=float)
            if not (z.shape == mu.shape and sigma.shape == (len(z), len(z))):
                raise DimensionError("holdings, mean and covariance sizes must agree")
            if not np.allclose(sigma, sigma.T, atol=1e-10 * (1.0 + np.abs(sigma).max())):
                raise ValueError("covariance must be symmetric")
            eigs = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
            if eigs.min() < -1e-10 * max(1.0, eigs.max()):
                raise ValueError("covariance must be positive semidefinite")
            if self.kappa is None or self.kappa <= 0:
                raise ValueError("risk aversion must be strictly positive")
            object.__setattr__(self, "z_curr", z)
            object.__setattr__(self, "mu", mu)
            object.__setattr__(self, "sigma", sigma)
        elif self.kind == EXPECTED_UTILITY:
            z = np.asarray(self.z_curr, dtype=float)
            samples = np.atleast_2d(np.asarray(self.return_samples, dtype=float))
            if samples.size == 0:
                raise ValueError("expected utility needs at least one return sample")
            if samples.shape[1] != len(z):
                raise DimensionError("return samples must have one column per asset")
            if self.psi_kind not in (PSI_LOG, PSI_POWER, PSI_NEG_EXP):
                raise ValueError(f"unknown scalar utility {self.psi_kind!r}")
            if self.psi_kind == PSI_POWER and not (self.psi_param < 1 and self.psi_param != 0):
                raise ValueError("power utility exponent must be < 1 and nonzero")
            if self.psi_kind == PSI_NEG_EXP and not self.psi_param > 0:
                raise ValueError("exponential utility rate must be positive")
            object.__setattr__(self, "z_curr", z)
            object.__setattr__(self, "return_samples", samples)
        else:
            raise ValueError(f"unknown utility kind {self.kind!r}")


@dataclass(frozen=True)
class TradeSolution:
    """Optimal trade plus diagnostics; utility_gain is relative to not trading."""

    trade: engine.Trade
    utility_gain: float
    report: solver.SolveReport
    post_prices: np.ndarray


def _scalar_utility(psi_kind, a):
    if psi_kind == PSI_LOG:

        def val(x):
            if np.any(x <= 0):
                raise DomainError("log utility needs positive wealth")
            return np.log(x)

        return val, lambda x: 1.0 / x
    if psi_kind == PSI_POWER:

        def val(x):
            if np.any(x <= 0):
                raise DomainError("power utility needs positive wealth")
            return x**a / a

        return val, lambda x: x ** (a - 1.0)
    return (lambda x: -np.exp(-a * x)), (lambda x: a * np.exp(-a * x))


def utility_oracle(utility):
    """Build value/gradient oracles for the trade solver."""
    if utility.kind == LINEAR:
        pi = utility.pi
        n = len(pi)
        return solver.ConcaveObjective(
            value=lambda z: float(pi @ z),
            gradient=lambda z: pi.copy(),
            curvature=solver.LINEAR,
            hessian=lambda z: np.zeros((n, n)),
        )
    if utility.kind == MARKOWITZ:
        z_curr, mu, sigma, kappa = utility.z_curr, utility.mu, utility.sigma, utility.kappa
        constant_hessian = -2.0 * kappa * sigma

        def val(z):
            w = z_curr + z
            return float(mu @ w - kappa * w @ sigma @ w)

        return solver.ConcaveObjective(
            value=val,
            gradient=lambda z: mu - 2.0 * kappa * (sigma @ (z_curr + z)),
            curvature=solver.QUADRATIC,
            hessian=lambda z: constant_hessian,
        )
    z_curr, samples = utility.z_curr, utility.return_samples
    count = samples.shape[0]
    psi, psi_prime = _scalar_utility(utility.psi_kind, utility.psi_param)

    def val(z):
        return float(np.mean(psi(samples @ (z_curr + z))))

    def grad(z):
        wealth = samples @ (z_curr + z)
        if utility.psi_kind in (PSI_LOG, PSI_POWER) and np.any(wealth <= 0):
            raise DomainError("scalar utility gradient needs positive wealth")
        return (psi_prime(wealth) @ samples) / count

    return solver.ConcaveObjective(value=val, gradient=grad, curvature=solver.GENERAL)


def no_trade_check(p, g, gamma):
    """True when no trade at prices p improves a utility with gradient g at zero.

    The condition is that some positive multiple of g fits between the
    fee-discounted and undiscounted prices.
    """
    p = np.asarray(p, dtype=float)
    g = np.asarray(g, dtype=float)
    if p.shape != g.shape:
        raise DimensionError("price and gradient vectors must have equal length")
    if np.any(p <= 0) or np.any(g <= 0):
        raise DomainError("no-trade check needs strictly positive inputs")
    if not 0.0 < gamma <= 1.0:
        raise DomainError("fee parameter must lie in (0, 1]")
    ratios = p / g
    return float(gamma * ratios.max()) <= float(ratios.min()) * (1.0 + 1e-12)


def optimal_trade(state, utility, options=None):
    """Best valid trade for the given utility; zero trade inside the no-trade cone."""
    oracle = utility_oracle(utility)
    n = state.n
    p = engine.prices(state)
    marginal = oracle.gradient(np.zeros(n))
    if len(marginal) != n:
        raise DimensionError("utility dimension must match the pool's asset count")
    if np.all(marginal > 0) and no_trade_check(p, marginal, state.gamma):
        trade = engine.zero_trade(n)
        report = _certified_zero_report(state, trade, oracle, p, marginal, options)
        return TradeSolution(trade, 0.0, report, p)
    trade, report = solver.solve_trade_problem(state, oracle, options)
    gain = oracle.value(trade.net) - oracle.value(np.zeros(n))
    post = state.reserves + trade.tender - trade.receive
    raw = engine.tf.gradient(state.phi, post)
    post_prices = raw / raw[-1]
    post_prices[-1] = 1.0
    return TradeSolution(trade, float(gain), report, post_prices)


def _certified_zero_report(state, trade, oracle, p, marginal, options):
    # multipliers certifying the zero trade, from the feasible scale interval
    opts = options or solver.SolveOptions()
    raw = engine.unscaled_prices(state)
    ratios = p / marginal
    scale = float(np.sqrt(state.gamma * ratios.max() * ratios.min()))
    lam = 1.0 / (scale * raw[-1])
    omega = np.maximum(marginal - lam * state.gamma * raw, 0.0)
    kappa = np.maximum(lam * raw - marginal, 0.0)
    residual = solver.kkt_residual(state, trade, oracle, lam, omega, kappa)
    status = solver.OPTIMAL if residual <= opts.kkt_tol else solver.MAX_ITERATIONS
    return solver.SolveReport(status, residual, 0.0, 0, 0)
