"""Constant function market maker engine and optimal-trading toolkit."""

from . import engine, harness, optimal_trade, solver, trading_functions, two_asset
from .engine import CfmmState, Trade
from .optimal_trade import UtilitySpec
from .solver import ConcaveObjective, SolveOptions, SolveReport
from .trading_functions import TradingFunctionSpec

__all__ = [
    "CfmmState",
    "ConcaveObjective",
    "SolveOptions",
    "SolveReport",
    "Trade",
    "TradingFunctionSpec",
    "UtilitySpec",
    "engine",
    "harness",
    "optimal_trade",
    "solver",
    "trading_functions",
    "two_asset",
]
