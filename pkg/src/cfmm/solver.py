"""Barrier-method solvers for the trade-choice and liquidity problems.

The trade problem maximizes a concave utility of the trader's net holdings
change subject to the pool keeping its trading-function value (relaxed to
an inequality, which is tight for increasing utilities) and nonnegative
baskets.  Both problems are smooth and convex, so a log-barrier interior
point method with damped Newton steps solves them to high accuracy.
"""

from dataclasses import dataclass

import numpy as np

from . import engine
from . import trading_functions as tf
from .errors import DomainError, Infeasible

OPTIMAL = "optimal"
NOT_TIGHT = "not_tight"
MAX_ITERATIONS = "max_iterations"
INFEASIBLE = "infeasible"

LINEAR = "linear"
QUADRATIC = "quadratic"
GENERAL = "general"


def tight_tolerance(phi_before):
    """Constraint slack below which the relaxation counts as tight."""
    return 1e-7 * (1.0 + abs(phi_before))


@dataclass
class ConcaveObjective:
    """Concave utility over the net holdings change, given as oracles.

    The gradient must match finite differences of the value; hessian may be
    omitted, in which case it is recovered by differencing the gradient
    (exactly for quadratic curvature, Gauss-Newton style otherwise).
    """

    value: callable
    gradient: callable
    curvature: str = GENERAL
    hessian: callable = None


@dataclass
class SolveOptions:
    """Numerical knobs of the barrier method."""

    kkt_tol: float = 1e-8
    barrier_mu0: float = 1.0
    barrier_shrink: float = 0.2
    max_outer: int = 60
    max_inner_newton: int = 50
    armijo_slope: float = 0.25
    backtrack: float = 0.5

    def __post_init__(self):
        for name in ("kkt_tol", "barrier_mu0", "max_outer", "max_inner_newton",
                     "armijo_slope", "backtrack", "barrier_shrink"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.barrier_shrink < 1:
            raise ValueError("barrier_shrink must lie in (0, 1)")


@dataclass
class SolveReport:
    status: str
    kkt_residual: float
    constraint_slack: float
    outer_iterations: int
    newton_steps: int


def _hessian_oracle(objective, n):
    """Return a z -> Hessian callable for the utility."""
    if objective.hessian is not None:
        return objective.hessian
    if objective.curvature == LINEAR:
        zero = np.zeros((n, n))
        return lambda z: zero
    if objective.curvature == QUADRATIC:
        constant = _difference_hessian(objective.gradient, np.zeros(n))
        return lambda z: constant
    return lambda z: _difference_hessian(objective.gradient, z)


def _difference_hessian(gradient, z, step=1e-4):
    n = len(z)
    h = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step * max(1.0, abs(z[k]))
        h[:, k] = (gradient(z + e) - gradient(z - e)) / (2.0 * e[k])
    return 0.5 * (h + h.T)


def _newton_direction(hess, grad):
    """Ascent direction -H^{-1} g for a (nearly) negative definite H."""
    ridge = 0.0
    for _ in range(8):
        try:
            direction = np.linalg.solve(hess - ridge * np.eye(len(grad)), -grad)
        except np.linalg.LinAlgError:
            direction = None
        if direction is not None and np.isfinite(direction).all() and grad @ direction > 0:
            return direction
        ridge = max(2.0 * ridge, 1e-8 * (1.0 + np.abs(np.diag(hess)).max()))
    return grad.copy()  # steepest ascent as a last resort


def _max_feasible_step(blocks):
    """Largest t with value + t * delta > 0 for every (value, delta) block."""
    t = 1.0
    for value, delta in blocks:
        shrinking = delta < 0
        if np.any(shrinking):
            t = min(t, 0.99 * float(np.min(value[shrinking] / -delta[shrinking])))
    return t


def _maximize_barrier(x, mu, fval, fgrad_hess, opts):
    """Damped Newton ascent of the barrier objective at fixed mu.

    Inside the quadratic convergence region (small Newton decrement) steps
    are taken undamped; objective comparisons there would drown in rounding.
    """
    steps = 0
    previous_decrement = np.inf
    for _ in range(opts.max_inner_newton):
        grad, hess, bound_blocks = fgrad_hess(x, mu)
        direction = _newton_direction(hess, grad)
        decrement_sq = float(grad @ direction)
        if decrement_sq <= 1e-8 * mu:
            break
        t_max = _max_feasible_step(bound_blocks(direction))
        if decrement_sq <= 0.0625 * mu:
            if decrement_sq >= previous_decrement:
                break  # rounding noise floor reached
            previous_decrement = decrement_sq
            x = x + min(1.0, t_max) * direction
            steps += 1
            continue
        b_x = fval(x, mu)
        slope = decrement_sq
        t = t_max
        while t > 1e-14:
            if fval(x + t * direction, mu) >= b_x + opts.armijo_slope * t * slope:
                break
            t *= opts.backtrack
        else:
            break
        x = x + t * direction
        steps += 1
    return x, steps


def solve_trade_problem(state, objective, options=None):
    """Utility-maximizing valid trade via the convex relaxation.

    Returns a canonical trade together with a report whose status is
    OPTIMAL only when the stationarity residual meets kkt_tol and the
    acceptance constraint is tight.
    """
    opts = options or SolveOptions()
    gamma = state.gamma
    spec = state.phi
    phi0 = tf.value(spec, state.reserves)
    eps_acc = engine.acceptance_tolerance(phi0)
    ttol = tight_tolerance(phi0)

    if gamma == 1.0:
        x, barrier, grad_hess, extract = _net_formulation(state, objective)
    else:
        x, barrier, grad_hess, extract = _split_formulation(state, objective)

    x, mu, outer, newton_total, ran_out = _barrier_path(x, barrier, grad_hess, opts)

    def finish(x, mu):
        d, l = extract(x)
        slack = tf.value_shift(spec, state.reserves, gamma * d - l)
        lam_path = mu / slack if slack > 0 else 0.0
        trade = engine.canonicalize_trade(
            engine.Trade(np.maximum(d, 0.0), np.maximum(l, 0.0)), gamma)
        return d, l, trade, slack, lam_path

    # removing basket overlaps and snapping the constraint perturb the
    # returned point by amounts proportional to mu, which curved utilities
    # turn into stationarity error; shrink mu further until certified
    d, l, trade, slack, lam_path = finish(x, mu)
    residual = _best_certificate(state, trade, objective, lam_path)
    extra = 0
    while (residual > opts.kkt_tol and not ran_out and extra < 8
           and outer < opts.max_outer):
        mu *= opts.barrier_shrink
        x, steps = _maximize_barrier(x, mu, barrier, grad_hess, opts)
        newton_total += steps
        outer += 1
        extra += 1
        d, l, trade, slack, lam_path = finish(x, mu)
        residual = _best_certificate(state, trade, objective, lam_path)

    def utility(z):
        try:
            u = objective.value(z)
        except DomainError:
            return -np.inf
        return u if np.isfinite(u) else -np.inf

    not_tight = False
    if slack > ttol:
        d_scaled, ok = _tighten(spec, state.reserves, gamma, phi0, d, l)
        if ok and utility(l - d_scaled) >= utility(l - d) - 1e-12 * (1.0 + abs(utility(l - d))):
            d = d_scaled
            trade = engine.canonicalize_trade(
                engine.Trade(np.maximum(d, 0.0), np.maximum(l, 0.0)), gamma)
            residual = _best_certificate(state, trade, objective, lam_path)
        else:
            not_tight = True
    slack = tf.value_shift(spec, state.reserves, gamma * trade.tender - trade.receive)

    if ran_out:
        status = MAX_ITERATIONS
    elif not_tight or slack > ttol:
        status = NOT_TIGHT
    elif residual <= opts.kkt_tol and slack >= -eps_acc:
        status = OPTIMAL
    else:
        status = MAX_ITERATIONS
    return trade, SolveReport(status, residual, slack, outer, newton_total)


def _best_certificate(state, trade, objective, lam_path):
    """Smallest certified KKT residual of the solved problem.

    The certified system extends the trade-problem Lagrangian with
    multipliers for the domain bound on the post-trade reserves, which can
    be active when the trading function has flat directions (linear or sum
    pools drained of an asset); at interior optima the extra multipliers
    vanish and this agrees with kkt_residual.  Candidate constraint
    multipliers come from the barrier path and from the stationarity
    equation of each traded coordinate.
    """
    post = state.reserves + state.gamma * trade.tender - trade.receive
    g_u = objective.gradient(trade.net)
    g_phi = tf.gradient(state.phi, post)
    gamma = state.gamma
    slack = tf.value_shift(state.phi, state.reserves,
                           gamma * trade.tender - trade.receive)
    candidates = [lam_path]
    candidates.extend(g_u[trade.tender > 0] / (gamma * g_phi[trade.tender > 0]))
    candidates.extend(g_u[trade.receive > 0] / g_phi[trade.receive > 0])
    best = np.inf
    for lam in candidates:
        if not np.isfinite(lam) or lam < 0:
            continue
        nu = np.maximum(g_u - lam * g_phi, 0.0)
        kappa = np.maximum(lam * g_phi - g_u, 0.0)
        omega = np.maximum(g_u - lam * gamma * g_phi - gamma * nu, 0.0)
        stationarity_d = -g_u + lam * gamma * g_phi + omega + gamma * nu
        # the receive-side stationarity is zero by construction of nu, kappa
        residual = max(
            float(np.abs(stationarity_d).max()),
            abs(lam * slack),
            float(np.abs(omega * trade.tender).max()),
            float(np.abs(kappa * trade.receive).max()),
            float(np.abs(nu * post).max()),
        )
        best = min(best, residual)
    return best


def _split_formulation(state, objective):
    """Barrier pieces over separate tender/receive baskets (fee strictly below 1)."""
    n = state.n
    reserves = state.reserves
    gamma = state.gamma
    spec = state.phi
    slack_of = tf.make_shift_value(spec, reserves)
    hess_u = _hessian_oracle(objective, n)
    hess_buf = np.empty((2 * n, 2 * n))
    grad_buf = np.empty(2 * n)
    idx = np.arange(n)

    def barrier(x, mu):
        d, l = x[:n], x[n:]
        post = reserves + gamma * d - l
        if d.min() <= 0 or l.min() <= 0 or post.min() <= 0:
            return -np.inf
        slack = slack_of(gamma * d - l)
        if slack <= 0:
            return -np.inf
        try:
            u = objective.value(l - d)
        except DomainError:
            return -np.inf
        if not np.isfinite(u):
            return -np.inf
        return u + mu * (np.log(slack) + np.log(d).sum() + np.log(l).sum()
                         + np.log(post).sum())

    def grad_hess(x, mu):
        d, l = x[:n], x[n:]
        post = reserves + gamma * d - l
        z = l - d
        slack = slack_of(gamma * d - l)
        g_u = objective.gradient(z)
        h_u = hess_u(z)
        g_phi, h_phi = tf.gradient_hessian(spec, post)
        constraint = mu * g_phi / slack
        grad_buf[:n] = -g_u + gamma * constraint + mu / d + mu * gamma / post
        grad_buf[n:] = g_u - constraint + mu / l - mu / post
        w = (mu / slack) * h_phi - np.outer(constraint, constraint) / mu
        dom = mu / post**2
        hess_buf[:n, :n] = h_u + gamma**2 * w
        hess_buf[:n, n:] = -h_u - gamma * w
        hess_buf[n:, :n] = hess_buf[:n, n:]
        hess_buf[n:, n:] = h_u + w
        hess_buf[idx, idx] -= mu / d**2 + gamma**2 * dom
        hess_buf[idx, n + idx] += gamma * dom
        hess_buf[n + idx, idx] += gamma * dom
        hess_buf[n + idx, n + idx] -= mu / l**2 + dom

        def bound_blocks(direction):
            dd, dl = direction[:n], direction[n:]
            return ((d, dd), (l, dl), (post, gamma * dd - dl))

        return grad_buf, hess_buf, bound_blocks

    # strictly feasible start: tiny tender with half of it (after the fee)
    # asked back keeps the function value above its current level
    eps = 1e-3 * float(reserves.min())
    x0 = np.concatenate([np.full(n, eps), np.full(n, 0.5 * gamma * eps)])

    def extract(x):
        return x[:n].copy(), x[n:].copy()

    return x0, barrier, grad_hess, extract


def _net_formulation(state, objective):
    """Barrier pieces over the net flow only, valid when there is no fee.

    Without a fee the pool constraint depends only on receive - tender, and
    splitting a net flow into overlapping baskets is a degenerate direction
    the split formulation cannot handle.
    """
    n = state.n
    reserves = state.reserves
    spec = state.phi
    slack_of = tf.make_shift_value(spec, reserves)
    hess_u = _hessian_oracle(objective, n)
    idx = np.arange(n)

    def barrier(z, mu):
        post = reserves - z
        if post.min() <= 0:
            return -np.inf
        slack = slack_of(-z)
        if slack <= 0:
            return -np.inf
        try:
            u = objective.value(z)
        except DomainError:
            return -np.inf
        if not np.isfinite(u):
            return -np.inf
        return u + mu * (np.log(slack) + np.log(post).sum())

    def grad_hess(z, mu):
        post = reserves - z
        slack = slack_of(-z)
        g_u = objective.gradient(z)
        g_phi, h_phi = tf.gradient_hessian(spec, post)
        constraint = mu * g_phi / slack
        grad = g_u - constraint + mu / post
        hess = hess_u(z) + (mu / slack) * h_phi - np.outer(constraint, constraint) / mu
        hess[idx, idx] -= mu / post**2

        def bound_blocks(direction):
            return ((post, -direction),)

        return grad, hess, bound_blocks

    z0 = np.full(n, -1e-3 * float(reserves.min()))

    def extract(z):
        return np.maximum(-z, 0.0), np.maximum(z, 0.0)

    return z0, barrier, grad_hess, extract


def _barrier_path(x, barrier, grad_hess, opts):
    """Follow the central path by shrinking mu geometrically."""
    mu = opts.barrier_mu0
    mu_floor = 0.05 * opts.kkt_tol
    outer = 0
    newton_total = 0
    ran_out = False
    while True:
        x, steps = _maximize_barrier(x, mu, barrier, grad_hess, opts)
        newton_total += steps
        outer += 1
        if mu <= mu_floor:
            break
        if outer >= opts.max_outer:
            ran_out = True
            break
        mu = max(mu * opts.barrier_shrink, mu_floor)
    return x, mu, outer, newton_total, ran_out


def _tighten(spec, reserves, gamma, phi0, d, l):
    """Scale the tender down until the acceptance constraint is an equality."""

    def offset(c):
        post = reserves + gamma * c * d - l
        if np.any(post <= 0):
            return -np.inf
        v = tf.value_shift(spec, reserves, gamma * c * d - l)
        return v if np.isfinite(v) else -np.inf

    lo, hi = 0.0, 1.0
    f_hi = offset(hi)
    if f_hi <= 0:
        return d, False
    ftol = 1e-12 * (1.0 + abs(phi0))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = offset(mid)
        if 0 <= f_mid <= ftol:
            return mid * d, True
        if f_mid > 0:
            hi = mid
        else:
            lo = mid
    return hi * d, True


def kkt_residual(state, trade, objective, lam, omega, kappa):
    """Stationarity and complementary-slackness residual of the trade problem.

    lam scales the acceptance constraint, omega and kappa the nonnegativity
    of the tender and receive baskets; all must be nonnegative.
    """
    omega = np.asarray(omega, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    post = state.reserves + state.gamma * trade.tender - trade.receive
    g_u = objective.gradient(trade.net)
    g_phi = tf.gradient(state.phi, post)
    slack = tf.value_shift(state.phi, state.reserves,
                           state.gamma * trade.tender - trade.receive)
    stationarity_d = -g_u + lam * state.gamma * g_phi + omega
    stationarity_l = g_u - lam * g_phi + kappa
    complementary = max(
        abs(lam * slack),
        float(np.abs(omega * trade.tender).max()),
        float(np.abs(kappa * trade.receive).max()),
    )
    return max(float(np.abs(stationarity_d).max()),
               float(np.abs(stationarity_l).max()),
               complementary)


def solve_liquidity_problem(state, budget, options=None):
    """Price-preserving reserve change worth at most `budget` at current prices.

    Maximizes the trading-function value over nonnegative post-change
    reserves subject to the budget; the optimality condition makes the new
    gradient collinear with the old one.  Returns (basket, alpha, report)
    where basket is the signed reserve change and alpha the gradient scale.
    """
    opts = options or SolveOptions()
    n = state.n
    reserves = state.reserves
    spec = state.phi
    p = engine.prices(state)
    pool_value = float(p @ reserves)
    if budget <= -pool_value:
        raise Infeasible("budget asks to remove more value than the pool holds")
    if budget == 0:
        return np.zeros(n), 1.0, SolveReport(OPTIMAL, 0.0, 0.0, 0, 0)
    g_old = tf.gradient(spec, reserves)

    def barrier(y, mu):
        if np.any(y <= 0):
            return -np.inf
        slack = budget - float(p @ (y - reserves))
        if slack <= 0:
            return -np.inf
        return tf.value(spec, y) + mu * (np.log(slack) + np.log(y).sum())

    def grad_hess(y, mu):
        slack = budget - float(p @ (y - reserves))
        grad = tf.gradient(spec, y) + mu * (-p / slack + 1.0 / y)
        hess = tf.hessian(spec, y) - mu * (np.outer(p, p) / slack**2 + np.diag(1.0 / y**2))

        def bound_blocks(direction):
            return ((y, direction), (np.array([slack]), np.array([-float(p @ direction)])))

        return grad, hess, bound_blocks

    ratio = budget / pool_value
    theta = 0.5 * ratio if budget > 0 else 0.5 * (ratio - 1.0)
    y = (1.0 + theta) * reserves
    mu = opts.barrier_mu0
    mu_floor = 0.05 * opts.kkt_tol
    outer = 0
    newton_total = 0
    ran_out = False
    while True:
        y, steps = _maximize_barrier(y, mu, barrier, grad_hess, opts)
        newton_total += steps
        outer += 1
        if mu <= mu_floor:
            break
        if outer >= opts.max_outer:
            ran_out = True
            break
        mu = max(mu * opts.barrier_shrink, mu_floor)

    basket = y - reserves
    g_new = tf.gradient(spec, y)
    alpha = float((g_new / g_old).mean())
    budget_slack = budget - float(p @ basket)
    residual = _liquidity_certificate(g_new, p, y, budget_slack, mu)
    status = MAX_ITERATIONS if ran_out or residual > opts.kkt_tol else OPTIMAL
    return basket, alpha, SolveReport(status, residual, budget_slack, outer, newton_total)


def _liquidity_certificate(g_new, p, y, budget_slack, mu):
    """Best KKT residual over candidate budget multipliers."""
    candidates = list(g_new / p)
    if budget_slack > 0:
        candidates.append(mu / budget_slack)
    best = np.inf
    for nu in candidates:
        if not np.isfinite(nu) or nu < 0:
            continue
        eta = np.maximum(nu * p - g_new, 0.0)
        residual = max(
            float(np.abs(g_new - nu * p + eta).max()),
            abs(nu * budget_slack),
            float(np.abs(eta * y).max()),
        )
        best = min(best, residual)
    return best
