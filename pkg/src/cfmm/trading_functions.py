"""Concave trading functions that drive trade acceptance in a CFMM pool.

Five variants are supported: a linear function with fixed per-asset prices,
the plain sum, a weighted geometric mean, a convex mix of sum and geometric
mean, and a sum-minus-reciprocal-product function of the kind used by
stable-asset pools.  All are concave, increasing and differentiable on the
positive orthant; all but the last are positively homogeneous.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

LINEAR = "linear"
SUM = "sum"
GEOMETRIC_MEAN = "geometric_mean"
HYBRID = "hybrid_sum_geomean"
CURVE_LIKE = "curve_like"

KINDS = (LINEAR, SUM, GEOMETRIC_MEAN, HYBRID, CURVE_LIKE)


@dataclass(frozen=True, eq=False)
class TradingFunctionSpec:
    """Parameters of one trading-function variant.

    kind   one of the module-level kind constants
    n      number of pool assets (>= 2)
    p      fixed positive prices (linear variant only)
    w      positive weights summing to one (geometric mean and hybrid)
    alpha  mix coefficient in [0, 1] for the hybrid variant, or the strictly
           positive coefficient of the reciprocal-product term
    """

    kind: str
    n: int
    p: np.ndarray | None = None
    w: np.ndarray | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trading function kind {self.kind!r}")
        if not isinstance(self.n, int) or self.n < 2:
            raise ValueError("asset count must be an integer >= 2")
        if self.kind == LINEAR:
            if self.p is None:
                raise ValueError("linear variant needs prices p")
            p = np.asarray(self.p, dtype=float)
            if p.shape != (self.n,):
                raise DimensionError("price vector length must equal the asset count")
            if np.any(p <= 0):
                raise ValueError("prices must be strictly positive")
            object.__setattr__(self, "p", _frozen(p))
        elif self.p is not None:
            raise ValueError(f"{self.kind} variant takes no price vector")
        if self.kind in (GEOMETRIC_MEAN, HYBRID):
            if self.w is None:
                raise ValueError(f"{self.kind} variant needs weights w")
            w = np.asarray(self.w, dtype=float)
            if w.shape != (self.n,):
                raise DimensionError("weight vector length must equal the asset count")
            if np.any(w <= 0):
                raise ValueError("weights must be strictly positive")
            if abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("weights must sum to one")
            object.__setattr__(self, "w", _frozen(w / w.sum()))
        elif self.w is not None:
            raise ValueError(f"{self.kind} variant takes no weight vector")
        if self.kind == HYBRID:
            if self.alpha is None or not 0.0 <= self.alpha <= 1.0:
                raise ValueError("hybrid mix coefficient must lie in [0, 1]")
        elif self.kind == CURVE_LIKE:
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("curve-like coefficient must be strictly positive")
        elif self.alpha is not None:
            raise ValueError(f"{self.kind} variant takes no alpha")

    @classmethod
    def linear(cls, p):
        return cls(LINEAR, len(p), p=np.asarray(p, dtype=float))

    @classmethod
    def sum(cls, n):
        return cls(SUM, n)

    @classmethod
    def geometric_mean(cls, w):
        return cls(GEOMETRIC_MEAN, len(w), w=np.asarray(w, dtype=float))

    @classmethod
    def constant_product(cls, n):
        return cls(GEOMETRIC_MEAN, n, w=np.full(n, 1.0 / n))

    @classmethod
    def hybrid(cls, w, alpha):
        return cls(HYBRID, len(w), w=np.asarray(w, dtype=float), alpha=float(alpha))

    @classmethod
    def curve_like(cls, n, alpha):
        return cls(CURVE_LIKE, n, alpha=float(alpha))


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def _check_reserves(spec, reserves, positive):
    r = np.asarray(reserves, dtype=float)
    if r.shape != (spec.n,):
        raise DimensionError(f"expected {spec.n} reserves, got shape {r.shape}")
    smallest = r.min()
    if positive:
        if smallest <= 0:
            raise DomainError("reserves must be strictly positive")
    elif smallest < 0:
        raise DomainError("reserves must be nonnegative")
    return r


def _geomean(w, r):
    # log-space keeps very large / very small reserves from over- or underflowing
    if r.min() == 0.0:
        return 0.0
    if len(r) == 2:  # scalar math avoids numpy dispatch in two-asset hot loops
        return math.exp(w[0] * math.log(r[0]) + w[1] * math.log(r[1]))
    return float(np.exp(w @ np.log(r)))


def value(spec, reserves):
    """Evaluate the trading function at the given reserves.

    The geometric-mean variants return the limit value 0 when a reserve is
    zero; the curve-like variant has no finite limit there and raises.
    """
    r = _check_reserves(spec, reserves, positive=False)
    if spec.kind == LINEAR:
        return float(spec.p @ r)
    if spec.kind == SUM:
        return float(r.sum())
    if spec.kind == GEOMETRIC_MEAN:
        return _geomean(spec.w, r)
    if spec.kind == HYBRID:
        return float((1.0 - spec.alpha) * r.sum() + spec.alpha * _geomean(spec.w, r))
    if np.any(r == 0):
        raise DomainError("curve-like value is undefined at zero reserves")
    return float(r.sum() - spec.alpha * np.exp(-np.log(r).sum()))


def gradient(spec, reserves):
    """Gradient of the trading function; strictly positive on its domain."""
    r = _check_reserves(spec, reserves, positive=True)
    if spec.kind == LINEAR:
        return spec.p.copy()
    if spec.kind == SUM:
        return np.ones(spec.n)
    if spec.kind == GEOMETRIC_MEAN:
        return _geomean(spec.w, r) * spec.w / r
    if spec.kind == HYBRID:
        geo = _geomean(spec.w, r)
        return (1.0 - spec.alpha) + spec.alpha * geo * spec.w / r
    q = np.exp(-np.log(r).sum())
    return 1.0 + spec.alpha * q / r


def hessian(spec, reserves):
    """Hessian of the trading function (negative semidefinite)."""
    r = _check_reserves(spec, reserves, positive=True)
    if spec.kind in (LINEAR, SUM):
        return np.zeros((spec.n, spec.n))
    if spec.kind in (GEOMETRIC_MEAN, HYBRID):
        geo = _geomean(spec.w, r)
        u = spec.w / r
        h = geo * (np.outer(u, u) - np.diag(u / r))
        if spec.kind == HYBRID:
            h = spec.alpha * h
        return h
    q = np.exp(-np.log(r).sum())
    v = 1.0 / r
    return -spec.alpha * q * (np.outer(v, v) + np.diag(v * v))


def gradient_hessian(spec, reserves):
    """Gradient and Hessian in one pass (the solver's hot path)."""
    r = _check_reserves(spec, reserves, positive=True)
    n = spec.n
    if spec.kind in (LINEAR, SUM):
        grad = spec.p.copy() if spec.kind == LINEAR else np.ones(n)
        return grad, np.zeros((n, n))
    if spec.kind in (GEOMETRIC_MEAN, HYBRID):
        geo = _geomean(spec.w, r)
        u = spec.w / r
        grad = geo * u
        hess = geo * (np.outer(u, u) - np.diag(u / r))
        if spec.kind == HYBRID:
            grad = (1.0 - spec.alpha) + spec.alpha * grad
            hess = spec.alpha * hess
        return grad, hess
    q = np.exp(-np.log(r).sum())
    v = 1.0 / r
    return 1.0 + spec.alpha * q * v, -spec.alpha * q * (np.outer(v, v) + np.diag(v * v))


def make_shift_value(spec, base):
    """Closure computing value(base + shift) - value(base) with base-dependent
    quantities precomputed; base must be strictly positive."""
    base = np.array(base, dtype=float)
    if spec.kind == LINEAR:
        p = spec.p
        return lambda shift: float(p @ shift)
    if spec.kind == SUM:
        return lambda shift: float(shift.sum())
    if spec.kind in (GEOMETRIC_MEAN, HYBRID):
        w = spec.w
        geo = _geomean(w, base)
        mix = spec.alpha if spec.kind == HYBRID else 1.0
        flat = 1.0 - mix

        def shift_value(shift):
            rel = shift / base
            if rel.min() <= -1:
                return value(spec, base + shift) - value(spec, base)
            geo_part = geo * np.expm1(w @ np.log1p(rel))
            return float(flat * shift.sum() + mix * geo_part)

        return shift_value
    alpha = spec.alpha
    q = np.exp(-np.log(base).sum())

    def shift_value(shift):
        rel = shift / base
        if rel.min() <= -1:
            return value(spec, base + shift) - value(spec, base)
        return float(shift.sum() - alpha * q * np.expm1(-np.log1p(rel).sum()))

    return shift_value


def value_shift(spec, base, shift):
    """value(base + shift) - value(base) without the cancellation of the
    naive difference; base must be strictly positive and base + shift
    nonnegative."""
    base = np.asarray(base, dtype=float)
    shift = np.asarray(shift, dtype=float)
    if spec.kind == LINEAR:
        return float(spec.p @ shift)
    if spec.kind == SUM:
        return float(shift.sum())
    rel = shift / base
    if np.any(rel <= -1):
        return value(spec, base + shift) - value(spec, base)
    if spec.kind == GEOMETRIC_MEAN:
        return float(_geomean(spec.w, base) * np.expm1(spec.w @ np.log1p(rel)))
    if spec.kind == HYBRID:
        geo_shift = _geomean(spec.w, base) * np.expm1(spec.w @ np.log1p(rel))
        return float((1.0 - spec.alpha) * shift.sum() + spec.alpha * geo_shift)
    q = np.exp(-np.log(base).sum())
    return float(shift.sum() - spec.alpha * q * np.expm1(-np.log1p(rel).sum()))


def is_homogeneous(spec):
    """True when scaling the reserves scales the function value equally."""
    return spec.kind != CURVE_LIKE


def spec_to_dict(spec):
    """Plain-dict form used inside state files."""
    out = {"kind": spec.kind, "n": spec.n}
    if spec.p is not None:
        out["p"] = [float(x) for x in spec.p]
    if spec.w is not None:
        out["w"] = [float(x) for x in spec.w]
    if spec.alpha is not None:
        out["alpha"] = float(spec.alpha)
    return out


def spec_from_dict(data):
    p = data.get("p")
    w = data.get("w")
    alpha = data.get("alpha")
    return TradingFunctionSpec(
        kind=data["kind"],
        n=int(data["n"]),
        p=None if p is None else np.asarray(p, dtype=float),
        w=None if w is None else np.asarray(w, dtype=float),
        alpha=None if alpha is None else float(alpha),
    )
