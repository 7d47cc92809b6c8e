"""State persistence, scenario replay, sweeps and figure-data jobs."""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import engine, optimal_trade, two_asset
from . import trading_functions as tf
from .errors import Infeasible

STATE_VERSION = 1

#: seed of the random covariance draw behind the risk-aversion sweep; fixed
#: so the shipped reference data is reproducible, and chosen so the trading
#: constraint stays tight over the whole risk-aversion grid (for some draws
#: the unconstrained portfolio optimum is pool-feasible and it is not)
DEFAULT_SIGMA_SEED = 1


# ---------------------------------------------------------------------------
# state files


def state_to_dict(state):
    return {
        "version": STATE_VERSION,
        "assets": list(state.assets),
        "reserves": [float(x) for x in state.reserves],
        "gamma": float(state.gamma),
        "trading_function": tf.spec_to_dict(state.phi),
        "providers": [[pid, float(w)] for pid, w in state.providers.items()],
    }


def state_from_dict(data):
    if data.get("version") != STATE_VERSION:
        raise ValueError(f"unsupported state file version {data.get('version')!r}")
    return engine.CfmmState(
        assets=tuple(data["assets"]),
        reserves=np.asarray(data["reserves"], dtype=float),
        gamma=float(data["gamma"]),
        phi=tf.spec_from_dict(data["trading_function"]),
        providers=dict(data.get("providers", [])),
    )


def save_state(state, path):
    Path(path).write_text(json.dumps(state_to_dict(state), indent=2) + "\n")


def load_state(path):
    return state_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# utility specs from config dicts


def utility_from_dict(data, rng=None):
    kind = data["kind"]
    if kind == optimal_trade.LINEAR:
        return optimal_trade.UtilitySpec(kind, pi=np.asarray(data["pi"], dtype=float))
    if kind == optimal_trade.MARKOWITZ:
        sigma = data.get("sigma")
        if sigma is None:
            seed = data.get("sigma_seed")
            n = len(data["mu"])
            draw = rng if seed is None and rng is not None else np.random.default_rng(seed)
            sigma = random_covariance(n, draw)
        return optimal_trade.UtilitySpec(
            kind,
            z_curr=np.asarray(data["z_curr"], dtype=float),
            mu=np.asarray(data["mu"], dtype=float),
            sigma=np.asarray(sigma, dtype=float),
            kappa=float(data["kappa"]),
        )
    if kind == optimal_trade.EXPECTED_UTILITY:
        samples = data.get("return_samples")
        if samples is None:
            samples = _read_sample_csv(data["return_samples_csv"])
        return optimal_trade.UtilitySpec(
            kind,
            z_curr=np.asarray(data["z_curr"], dtype=float),
            return_samples=np.asarray(samples, dtype=float),
            psi_kind=data["psi_kind"],
            psi_param=data.get("psi_param"),
        )
    raise ValueError(f"unknown utility kind {kind!r}")


def random_covariance(n, rng):
    """Covariance from a square standard-normal draw, scaled down."""
    v = rng.standard_normal((n, n))
    return v.T @ v / 100.0


def _read_sample_csv(path):
    with open(path, newline="") as fh:
        return [[float(x) for x in row] for row in csv.reader(fh) if row]


# ---------------------------------------------------------------------------
# CSV output

def _fmt(x):
    return repr(float(x))


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell if isinstance(cell, str) else _fmt(cell) for cell in row])
    return path


def parse_sweep(text):
    """Parse 'lo:hi:steps' into a uniform grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("sweep must look like lo:hi:steps")
    lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if steps < 2 or hi <= lo:
        raise ValueError("sweep needs hi > lo and at least two steps")
    return np.linspace(lo, hi, steps)


def quote_sweep_rows(state, i, j, grid, direction):
    """(input, output) rows over a grid; infeasible reverse quotes marked 'inf'."""
    rows = []
    for x in grid:
        if direction == "forward":
            rows.append((x, two_asset.forward_exchange(state, i, j, float(x)).output_amount))
        else:
            try:
                quote = two_asset.reverse_exchange(state, i, j, float(x))
                rows.append((x, quote.output_amount))
            except Infeasible:
                rows.append((x, float("inf")))
    return rows


# ---------------------------------------------------------------------------
# figure-data jobs


def _two_asset_demo_states():
    spec = tf.TradingFunctionSpec.geometric_mean([0.2, 0.8])
    make = lambda reserves: engine.CfmmState(
        ("A", "B"), np.asarray(reserves, dtype=float), 0.997, spec, {"pool": 1.0})
    return make([1.0, 100.0]), make([0.1, 10.0])


def figure_exchange_curves(out_dir):
    """Forward and reverse exchange curves at two reserve levels (CSV pair)."""
    big, small = _two_asset_demo_states()
    deltas = np.linspace(0.0, 10.0, 201)
    forward = [
        (d,
         two_asset.forward_exchange(big, 0, 1, float(d)).output_amount,
         two_asset.forward_exchange(small, 0, 1, float(d)).output_amount)
        for d in deltas
    ]
    lams = np.linspace(0.0, 15.0, 301)
    reverse = []
    for lam in lams:
        row = [lam]
        for state in (big, small):
            try:
                row.append(two_asset.reverse_exchange(state, 0, 1, float(lam)).output_amount)
            except Infeasible:
                row.append(float("inf"))
        reverse.append(tuple(row))
    return [
        write_csv(Path(out_dir) / "fig1_forward.csv",
                  ["delta", "lambda_reserves_1_100", "lambda_reserves_01_10"], forward),
        write_csv(Path(out_dir) / "fig1_reverse.csv",
                  ["lambda", "delta_reserves_1_100", "delta_reserves_01_10"], reverse),
    ]


def _tender_boundary_state():
    spec = tf.TradingFunctionSpec.constant_product(4)
    return engine.CfmmState(("A", "B", "C", "D"), np.array([4.0, 5.0, 6.0, 7.0]),
                            0.997, spec, {"pool": 1.0})


def figure_tender_boundary(out_dir, points=121):
    """Boundary of tendered (third, fourth) amounts balancing a fixed receive basket."""
    state = _tender_boundary_state()
    receive = np.array([2.0, 4.0, 0.0, 0.0])
    phi0 = tf.value(state.phi, state.reserves)
    ftol = 1e-12 * (1.0 + abs(phi0))

    def residual_at(d3, d4):
        tender = np.array([0.0, 0.0, d3, d4])
        post = state.reserves + state.gamma * tender - receive
        return tf.value(state.phi, post) - phi0

    def solve_d4(d3):
        f = lambda d4: residual_at(d3, d4)
        if abs(f(0.0)) <= ftol:
            return 0.0
        hi = 1.0
        while f(hi) <= 0:
            hi *= 2.0
        from .rootfind import bisect

        d4, _ = bisect(f, 0.0, hi, ftol)
        return d4

    # the boundary meets the axis where the third asset alone balances the trade
    f3 = lambda d3: residual_at(d3, 0.0)
    hi = 1.0
    while f3(hi) <= 0:
        hi *= 2.0
    from .rootfind import bisect

    d3_max, _ = bisect(f3, 0.0, hi, ftol)
    rows = []
    for d3 in np.linspace(0.0, d3_max, points):
        d4 = solve_d4(float(d3))
        rows.append((d3, d4, residual_at(float(d3), d4)))
    return [write_csv(Path(out_dir) / "fig2_tender_boundary.csv",
                      ["delta3", "delta4", "residual"], rows)]


def six_asset_state(gamma):
    """The six-asset equal-weight pool used by the sweep examples."""
    spec = tf.TradingFunctionSpec.constant_product(6)
    return engine.CfmmState(
        ("A1", "A2", "A3", "A4", "A5", "A6"),
        np.array([1.0, 3.0, 2.0, 5.0, 7.0, 6.0]),
        gamma, spec, {"pool": 1.0})


def figure_private_price_sweep(out_dir, steps=151, options=None):
    """Net optimal trades as the private price of the first asset is scaled."""
    state = six_asset_state(0.9)
    p = engine.prices(state)
    header = ["t"] + [f"net_{a}" for a in state.assets] + ["utility_gain"]
    rows = []
    for t in np.linspace(0.5, 2.0, steps):
        pi = p.copy()
        pi[0] *= t
        utility = optimal_trade.UtilitySpec(optimal_trade.LINEAR, pi=pi)
        solution = optimal_trade.optimal_trade(state, utility, options)
        rows.append((t, *solution.trade.net, solution.utility_gain))
    return [write_csv(Path(out_dir) / "fig3_private_price_sweep.csv", header, rows)]


MARKOWITZ_HOLDINGS = (2.5, 1.0, 0.5, 2.5, 3.0, 1.0)
MARKOWITZ_MEAN = (-0.01, 0.01, 0.03, 0.05, -0.02, 0.02)


def figure_risk_aversion_sweep(out_dir, seed=DEFAULT_SIGMA_SEED, points=20, options=None):
    """Net optimal trades as risk aversion varies, for a seeded covariance draw."""
    state = six_asset_state(0.997)
    sigma = random_covariance(6, np.random.default_rng(seed))
    header = (["kappa"] + [f"net_{a}" for a in state.assets]
              + ["constraint_slack", "kkt_residual"])
    rows = []
    for kappa in np.logspace(-2, 1, points):
        utility = optimal_trade.UtilitySpec(
            optimal_trade.MARKOWITZ,
            z_curr=np.asarray(MARKOWITZ_HOLDINGS),
            mu=np.asarray(MARKOWITZ_MEAN),
            sigma=sigma,
            kappa=float(kappa),
        )
        solution = optimal_trade.optimal_trade(state, utility, options)
        rows.append((kappa, *solution.trade.net,
                     solution.report.constraint_slack, solution.report.kkt_residual))
    return [write_csv(Path(out_dir) / "fig4_risk_aversion_sweep.csv", header, rows)]


FIGURE_JOBS = {
    1: figure_exchange_curves,
    2: figure_tender_boundary,
    3: figure_private_price_sweep,
    4: figure_risk_aversion_sweep,
}


def run_figures(which, out_dir, seed=DEFAULT_SIGMA_SEED):
    written = []
    for number in which:
        job = FIGURE_JOBS[int(number)]
        if int(number) == 4:
            written.extend(job(out_dir, seed=seed))
        else:
            written.extend(job(out_dir))
    return written


# ---------------------------------------------------------------------------
# scenario replay


@dataclass
class ScenarioConfig:
    """Initial state (inline dict or path), RNG seed, and ordered actions."""

    initial_state: object
    seed: int
    actions: list


def load_scenario(path):
    data = json.loads(Path(path).read_text())
    return ScenarioConfig(
        initial_state=data["initial_state"],
        seed=int(data.get("seed", 0)),
        actions=list(data.get("actions", [])),
    )


def _resolve_state(ref, base_dir):
    if isinstance(ref, str):
        return load_state(Path(base_dir) / ref)
    return state_from_dict(ref)


def run_scenario(config, out_dir, base_dir="."):
    """Replay the scenario's actions; deterministic given the seed.

    Writes replay.csv (one row per action) plus any sweep CSVs and the final
    state, and returns (final_state, log_rows).
    """
    state = _resolve_state(config.initial_state, base_dir)
    rng = np.random.default_rng(config.seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = []
    for index, action in enumerate(config.actions):
        op = action["op"]
        if op == "trade":
            trade = engine.canonicalize_trade(
                engine.Trade(np.asarray(action["tender"], dtype=float),
                             np.asarray(action["receive"], dtype=float)),
                state.gamma)
            state = engine.execute_trade(state, trade)
            log.append((index, op, "ok", _fmt(tf.value(state.phi, state.reserves))))
        elif op == "trade_with_slippage":
            trade = engine.Trade(np.asarray(action["tender"], dtype=float),
                                 np.asarray(action["receive"], dtype=float))
            state, scale = engine.execute_trade_with_slippage(
                state, trade, float(action.get("eta", 0.0)))
            log.append((index, op, "ok", _fmt(scale)))
        elif op in ("quote_forward", "quote_reverse"):
            i = state.asset_index(action["i"])
            j = state.asset_index(action["j"])
            amount = float(action["amount"])
            if op == "quote_forward":
                quote = two_asset.forward_exchange(state, i, j, amount)
            else:
                quote = two_asset.reverse_exchange(state, i, j, amount)
            log.append((index, op, "ok", _fmt(quote.output_amount)))
        elif op in ("add_liquidity", "remove_liquidity"):
            direction = engine.ADD if op == "add_liquidity" else engine.REMOVE
            provider = str(action["provider"])
            if direction == engine.REMOVE and provider not in state.providers:
                raise KeyError(f"unknown provider {provider!r}")
            if "nu" in action:
                basket = float(action["nu"]) * state.reserves
            else:
                basket = np.asarray(action["basket"], dtype=float)
            state = engine.execute_liquidity_change(state, provider, basket, direction)
            log.append((index, op, "ok", _fmt(state.providers.get(provider, 0.0))))
        elif op == "optimal_trade":
            utility = utility_from_dict(action["utility"], rng=rng)
            solution = optimal_trade.optimal_trade(state, utility)
            if action.get("commit", True):
                state = engine.execute_trade(state, solution.trade)
            log.append((index, op, solution.report.status, _fmt(solution.utility_gain)))
        elif op == "sweep":
            i = state.asset_index(action["i"])
            j = state.asset_index(action["j"])
            grid = parse_sweep(action["grid"])
            rows = quote_sweep_rows(state, i, j, grid, action.get("direction", "forward"))
            name = action.get("file", f"sweep_{index}.csv")
            write_csv(out_dir / name, ["input", "output"], rows)
            log.append((index, op, "ok", name))
        else:
            raise ValueError(f"unknown scenario action {op!r}")
    write_csv(out_dir / "replay.csv", ["index", "op", "status", "info"],
              [(str(a), b, c, d) for a, b, c, d in log])
    save_state(state, out_dir / "final_state.json")
    return state, log
