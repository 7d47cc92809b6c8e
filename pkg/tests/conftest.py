import numpy as np
import pytest

from cfmm import engine
from cfmm import trading_functions as tf


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_variants(n, rng):
    """One spec of every trading-function kind with random valid parameters."""
    w = rng.uniform(0.2, 1.0, n)
    w /= w.sum()
    return [
        tf.TradingFunctionSpec.linear(rng.uniform(0.5, 3.0, n)),
        tf.TradingFunctionSpec.sum(n),
        tf.TradingFunctionSpec.geometric_mean(w),
        tf.TradingFunctionSpec.hybrid(w, rng.uniform(0.1, 0.9)),
        tf.TradingFunctionSpec.curve_like(n, rng.uniform(0.2, 2.0)),
    ]


def random_reserves(n, rng, lo=0.5, hi=20.0):
    return rng.uniform(lo, hi, n)


def random_state(rng, n=3, kind=None, gamma=None, lo=0.5, hi=20.0):
    specs = make_variants(n, rng)
    if kind is not None:
        spec = next(s for s in specs if s.kind == kind)
    else:
        spec = specs[rng.integers(len(specs))]
    return engine.CfmmState(
        tuple(f"A{k}" for k in range(n)),
        random_reserves(n, rng, lo, hi),
        float(gamma if gamma is not None else rng.uniform(0.9, 1.0)),
        spec,
        {"pool": 1.0},
    )
