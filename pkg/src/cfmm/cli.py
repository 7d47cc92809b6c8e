"""Command line interface.

Exit codes: 0 success, 2 rejected action, 3 solver failure, 4 bad input.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import engine, harness, optimal_trade, solver, two_asset
from . import trading_functions as tf
from .errors import (
    CfmmError,
    ConvergenceError,
    DimensionError,
    DomainError,
    Infeasible,
    InsufficientShare,
    InvalidLiquidityBasket,
    NegativeReserves,
    NoValidScale,
    RejectedTrade,
    SlippageExceeded,
)

EXIT_OK = 0
EXIT_REJECTED = 2
EXIT_SOLVER = 3
EXIT_BAD_INPUT = 4

_REJECTED = (RejectedTrade, SlippageExceeded, NoValidScale, InsufficientShare,
             InvalidLiquidityBasket, Infeasible)
_BAD_INPUT = (DomainError, DimensionError, NegativeReserves, ValueError, KeyError,
              OSError, json.JSONDecodeError)


def _floats(text):
    return np.array([float(x) for x in text.split(",")], dtype=float)


def _phi_from_args(args, n):
    kind = args.phi
    if kind == "sum":
        return tf.TradingFunctionSpec.sum(n)
    if kind == "linear":
        if args.prices is None:
            raise ValueError("--phi linear needs --prices")
        return tf.TradingFunctionSpec.linear(_floats(args.prices))
    if kind == "geomean":
        w = _floats(args.weights) if args.weights else np.full(n, 1.0 / n)
        return tf.TradingFunctionSpec.geometric_mean(w)
    if kind == "hybrid":
        if args.alpha is None:
            raise ValueError("--phi hybrid needs --alpha")
        w = _floats(args.weights) if args.weights else np.full(n, 1.0 / n)
        return tf.TradingFunctionSpec.hybrid(w, args.alpha)
    if kind == "curve":
        if args.alpha is None:
            raise ValueError("--phi curve needs --alpha")
        return tf.TradingFunctionSpec.curve_like(n, args.alpha)
    raise ValueError(f"unknown trading function {kind!r}")


def _print_state(state):
    print(f"assets:    {', '.join(state.assets)}")
    print(f"reserves:  {', '.join(f'{x:.6g}' for x in state.reserves)}")
    print(f"gamma:     {state.gamma:.6g}")
    print(f"function:  {state.phi.kind}")
    print(f"value:     {tf.value(state.phi, state.reserves):.6g}")
    if np.all(state.reserves > 0):
        p = engine.prices(state)
        print(f"prices:    {', '.join(f'{x:.6g}' for x in p)}")
        print(f"pool value: {engine.reserve_value(state):.6g}")
    for pid, w in state.providers.items():
        print(f"provider {pid}: {w:.6g}")


def _cmd_state(args):
    if args.action == "init":
        assets = tuple(args.assets.split(","))
        reserves = _floats(args.reserves)
        phi = _phi_from_args(args, len(assets))
        providers = {}
        for item in args.provider or ["pool=1.0"]:
            pid, _, weight = item.partition("=")
            providers[pid] = float(weight or 1.0)
        state = engine.CfmmState(assets, reserves, args.gamma, phi, providers)
        harness.save_state(state, args.state)
        print(f"wrote {args.state}")
    else:
        _print_state(harness.load_state(args.state))
    return EXIT_OK


def _resolve_pair(state, pair):
    i_text, j_text = pair.split(",")
    def resolve(text):
        text = text.strip()
        return int(text) if text.isdigit() else state.asset_index(text)
    return resolve(i_text), resolve(j_text)


def _cmd_quote(args):
    state = harness.load_state(args.state)
    i, j = _resolve_pair(state, args.pair)
    if args.sweep:
        grid = harness.parse_sweep(args.sweep)
        rows = harness.quote_sweep_rows(state, i, j, grid, args.direction)
        out = Path(args.out or ".") / f"quote_{args.direction}_{i}_{j}.csv"
        harness.write_csv(out, ["input", "output"], rows)
        print(f"wrote {out}")
        return EXIT_OK
    if args.direction == "forward":
        quote = two_asset.forward_exchange(state, i, j, args.amount)
        print(f"tender {quote.input_amount:.6g} of {state.assets[i]} "
              f"-> receive {quote.output_amount:.6g} of {state.assets[j]}")
    else:
        quote = two_asset.reverse_exchange(state, i, j, args.amount)
        print(f"receive {quote.input_amount:.6g} of {state.assets[j]} "
              f"<- tender {quote.output_amount:.6g} of {state.assets[i]}")
    print(f"rate {quote.realized_rate:.6g} ({quote.method}, {quote.iterations} iterations)")
    return EXIT_OK


def _solve_options(args):
    if getattr(args, "tol", None):
        return solver.SolveOptions(kkt_tol=args.tol)
    return None


def _cmd_trade(args):
    state = harness.load_state(args.state)
    utility_cfg = json.loads(Path(args.utility).read_text())
    options = _solve_options(args)
    if args.sweep:
        return _trade_sweep(args, state, utility_cfg, options)
    utility = harness.utility_from_dict(utility_cfg)
    solution = optimal_trade.optimal_trade(state, utility, options)
    report = solution.report
    print(f"tender:   {', '.join(f'{x:.6g}' for x in solution.trade.tender)}")
    print(f"receive:  {', '.join(f'{x:.6g}' for x in solution.trade.receive)}")
    print(f"utility gain: {solution.utility_gain:.6g}")
    print(f"status {report.status}, kkt {report.kkt_residual:.3g}, "
          f"slack {report.constraint_slack:.3g}, "
          f"{report.outer_iterations} outer / {report.newton_steps} newton steps")
    if report.status not in (solver.OPTIMAL, solver.NOT_TIGHT):
        return EXIT_SOLVER
    if args.commit:
        harness.save_state(engine.execute_trade(state, solution.trade), args.state)
        print(f"updated {args.state}")
    return EXIT_OK


def _trade_sweep(args, state, utility_cfg, options):
    grid = harness.parse_sweep(args.sweep)
    param = args.sweep_param or (
        "kappa" if utility_cfg["kind"] == optimal_trade.MARKOWITZ else "t")
    header = [param] + [f"net_{a}" for a in state.assets] + ["utility_gain"]
    rows = []
    for x in grid:
        cfg = dict(utility_cfg)
        if param == "t":
            pi = np.asarray(cfg["pi"], dtype=float).copy()
            pi[0] *= x
            cfg["pi"] = pi
        elif param == "kappa":
            cfg["kappa"] = float(x)
        else:
            raise ValueError(f"unknown sweep parameter {param!r}")
        utility = harness.utility_from_dict(cfg)
        solution = optimal_trade.optimal_trade(state, utility, options)
        rows.append((x, *solution.trade.net, solution.utility_gain))
    out = Path(args.out or ".") / "trade_sweep.csv"
    harness.write_csv(out, header, rows)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_liquidity(args):
    state = harness.load_state(args.state)
    if args.budget is not None:
        budget = args.budget if args.direction == "add" else -args.budget
        psi, alpha, report = solver.solve_liquidity_problem(state, budget,
                                                            _solve_options(args))
        if report.status != solver.OPTIMAL:
            print(f"solver status {report.status}", file=sys.stderr)
            return EXIT_SOLVER
        print(f"basket: {', '.join(f'{x:.6g}' for x in psi)}")
        new_state = engine.apply_signed_liquidity(state, args.provider, psi)
        print(f"gradient scale alpha: {alpha:.6g}")
        for pid, w in new_state.providers.items():
            print(f"provider {pid}: {w:.6g}")
        if args.commit:
            harness.save_state(new_state, args.state)
            print(f"updated {args.state}")
        return EXIT_OK
    if args.nu is not None:
        basket = args.nu * state.reserves
    else:
        basket = _floats(args.basket)
    direction = engine.ADD if args.direction == "add" else engine.REMOVE
    if args.clip:
        if direction != engine.ADD:
            raise ValueError("--clip only applies to additions")
        basket, remainder = engine.max_liquidity_clip(state, basket)
        print(f"clipped basket: {', '.join(f'{x:.6g}' for x in basket)}")
        print(f"returned remainder: {', '.join(f'{x:.6g}' for x in remainder)}")
        if np.any(basket != 0):
            new_state = engine.apply_signed_liquidity(state, args.provider, basket)
            for pid, w in new_state.providers.items():
                print(f"provider {pid}: {w:.6g}")
            if args.commit:
                harness.save_state(new_state, args.state)
                print(f"updated {args.state}")
        return EXIT_OK
    if np.any(basket != 0):
        new_state = engine.execute_liquidity_change(state, args.provider, basket, direction)
    else:
        new_state = state
    check = engine.check_liquidity_change(state, basket, direction)
    print(f"gradient scale alpha: {check.alpha:.6g}")
    for pid, w in new_state.providers.items():
        print(f"provider {pid}: {w:.6g}")
    if args.commit:
        harness.save_state(new_state, args.state)
        print(f"updated {args.state}")
    return EXIT_OK


def _cmd_figures(args):
    written = harness.run_figures(args.which, args.out, seed=args.seed)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_replay(args):
    config = harness.load_scenario(args.scenario)
    base_dir = Path(args.scenario).parent
    _, log = harness.run_scenario(config, args.out, base_dir=base_dir)
    print(f"replayed {len(log)} actions into {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="cfmm",
                                     description="constant function market maker toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    state = sub.add_parser("state", help="create or inspect a pool state file")
    state.add_argument("action", choices=["init", "show"])
    state.add_argument("--state", required=True, help="state file path")
    state.add_argument("--assets", help="comma separated labels (init)")
    state.add_argument("--reserves", help="comma separated amounts (init)")
    state.add_argument("--gamma", type=float, default=1.0)
    state.add_argument("--phi", default="geomean",
                       choices=["sum", "linear", "geomean", "hybrid", "curve"])
    state.add_argument("--weights", help="comma separated weights")
    state.add_argument("--prices", help="comma separated prices (linear)")
    state.add_argument("--alpha", type=float)
    state.add_argument("--provider", action="append", help="id=weight, repeatable")
    state.set_defaults(func=_cmd_state)

    quote = sub.add_parser("quote", help="price a two-asset swap")
    quote.add_argument("--state", required=True)
    quote.add_argument("--pair", required=True, help="i,j as labels or indices")
    quote.add_argument("--amount", type=float, default=0.0)
    quote.add_argument("--direction", choices=["forward", "reverse"], default="forward")
    quote.add_argument("--sweep", help="lo:hi:steps grid instead of one amount")
    quote.add_argument("--out", help="output directory for sweep CSVs")
    quote.set_defaults(func=_cmd_quote)

    trade = sub.add_parser("trade", help="solve for the utility-optimal trade")
    trade.add_argument("--state", required=True)
    trade.add_argument("--utility", required=True, help="utility config JSON")
    trade.add_argument("--commit", action="store_true", help="write the post-trade state")
    trade.add_argument("--sweep", help="lo:hi:steps parameter grid")
    trade.add_argument("--sweep-param", choices=["t", "kappa"])
    trade.add_argument("--out", help="output directory for sweep CSVs")
    trade.add_argument("--tol", type=float, help="stationarity tolerance override")
    trade.set_defaults(func=_cmd_trade)

    liq = sub.add_parser("liquidity", help="add or remove pool liquidity")
    liq.add_argument("--state", required=True)
    liq.add_argument("--provider", required=True)
    liq.add_argument("--direction", choices=["add", "remove"], default="add")
    group = liq.add_mutually_exclusive_group(required=True)
    group.add_argument("--basket", help="comma separated amounts")
    group.add_argument("--nu", type=float, help="fraction of the current reserves")
    group.add_argument("--budget", type=float,
                       help="value budget; basket found by the liquidity solver")
    liq.add_argument("--clip", action="store_true",
                     help="treat the basket as a maximum and add the largest valid part")
    liq.add_argument("--commit", action="store_true")
    liq.add_argument("--tol", type=float)
    liq.set_defaults(func=_cmd_liquidity)

    figures = sub.add_parser("figures", help="emit the bundled figure data CSVs")
    figures.add_argument("--which", type=int, nargs="+", default=[1, 2, 3, 4],
                         choices=[1, 2, 3, 4])
    figures.add_argument("--out", required=True)
    figures.add_argument("--seed", type=int, default=harness.DEFAULT_SIGMA_SEED)
    figures.set_defaults(func=_cmd_figures)

    replay = sub.add_parser("replay", help="replay a scenario file")
    replay.add_argument("--scenario", required=True)
    replay.add_argument("--out", required=True)
    replay.set_defaults(func=_cmd_replay)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _REJECTED as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except _BAD_INPUT as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except CfmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
