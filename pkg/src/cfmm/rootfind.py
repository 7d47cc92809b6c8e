"""Scalar root finding: plain bisection and bracket-safeguarded Newton."""

import math

from .errors import ConvergenceError, DomainError

BISECTION = "bisection"
NEWTON = "newton"

#: relative interval / step width at which a root counts as resolved
XTOL = 1e-13


def bisect(f, lo, hi, ftol, max_iter=200, f_lo=None, f_hi=None):
    """Find a root of a monotone f on [lo, hi] by bisection.

    Stops when |f| <= ftol or the interval collapses to relative width XTOL;
    f(lo) and f(hi) must have opposite (or zero) signs.  Endpoint values may
    be passed in when already known.  Returns (root, iterations).
    """
    if f_lo is None:
        f_lo = f(lo)
    if abs(f_lo) <= ftol:
        return lo, 0
    if f_hi is None:
        f_hi = f(hi)
    if abs(f_hi) <= ftol:
        return hi, 0
    if f_lo * f_hi > 0:
        raise ConvergenceError(f"no sign change on [{lo:.6g}, {hi:.6g}]")
    for k in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) <= ftol or mid == lo or mid == hi:
            return mid, k
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo <= XTOL * (1.0 + abs(hi)):
            return 0.5 * (lo + hi), k
    return 0.5 * (lo + hi), max_iter


def newton_bracketed(f, fprime, x0, lo, hi, ftol, max_newton=100, trace=None):
    """Newton iteration kept inside [lo, hi], with bisection fallback.

    f must be monotone with a root in the bracket.  Stops on |f| <= ftol or
    a step of relative size XTOL.  fprime may raise DomainError near the
    bracket ends, which also triggers the fallback.  Returns
    (root, iterations, method).
    """
    x = min(max(x0, lo), hi)
    if trace is not None:
        trace.append(x)
    for k in range(max_newton):
        fx = f(x)
        if abs(fx) <= ftol:
            return x, k, NEWTON
        try:
            dfx = fprime(x)
        except DomainError:
            break
        if dfx == 0 or not math.isfinite(dfx):
            break
        step = -fx / dfx
        x_new = x + step
        if not math.isfinite(x_new) or x_new < lo or x_new > hi:
            break
        x = x_new
        if trace is not None:
            trace.append(x)
        if abs(step) <= XTOL * (1.0 + abs(x)):
            return x, k + 1, NEWTON
    root, iters = bisect(f, lo, hi, ftol)
    return root, iters, BISECTION


def grow_bracket(f, hi0, max_grow=200):
    """Double hi until f(hi) > 0; f must be increasing and unbounded above.

    Returns (hi, f_hi).
    """
    hi = hi0
    for _ in range(max_grow):
        f_hi = f(hi)
        if f_hi > 0:
            return hi, f_hi
        hi *= 2.0
    raise ConvergenceError("failed to bracket the root from above")
