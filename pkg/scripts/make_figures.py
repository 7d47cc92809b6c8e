#!/usr/bin/env python3
"""Regenerate all bundled figure data CSVs.

Usage: python scripts/make_figures.py [--out data/figures] [--seed N]
"""

import argparse

from cfmm import harness


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/figures")
    parser.add_argument("--seed", type=int, default=harness.DEFAULT_SIGMA_SEED,
                        help="covariance seed for the risk-aversion sweep")
    args = parser.parse_args()
    for path in harness.run_figures([1, 2, 3, 4], args.out, seed=args.seed):
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
