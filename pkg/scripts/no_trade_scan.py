#!/usr/bin/env python3
"""Scan the private-price scale for the boundaries of the no-trade region.

Sweeps the factor t applied to the first asset's private price over a fine
grid and reports where the optimal trade stops being zero, together with the
analytic prediction [gamma, 1/gamma].
"""

import argparse

import numpy as np

from cfmm import engine, harness, optimal_trade


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--gamma", type=float, default=0.9)
    parser.add_argument("--step", type=float, default=1e-3)
    parser.add_argument("--lo", type=float, default=0.5)
    parser.add_argument("--hi", type=float, default=2.0)
    args = parser.parse_args()

    state = harness.six_asset_state(args.gamma)
    p = engine.prices(state)
    ts = np.arange(args.lo, args.hi + 1e-12, args.step)
    zero = []
    for t in ts:
        pi = p.copy()
        pi[0] *= t
        solution = optimal_trade.optimal_trade(
            state, optimal_trade.UtilitySpec(optimal_trade.LINEAR, pi=pi))
        if solution.trade.is_zero:
            zero.append(t)
    print(f"scanned {len(ts)} points with step {args.step:g}")
    if zero:
        print(f"zero-trade region: [{min(zero):.4f}, {max(zero):.4f}]")
    else:
        print("no zero-trade points found")
    print(f"analytic prediction: [{args.gamma:.4f}, {1 / args.gamma:.4f}]")


if __name__ == "__main__":
    main()
