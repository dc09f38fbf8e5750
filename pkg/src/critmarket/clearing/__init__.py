from .graphs import CompatibilityGraphs, budget_scale, build_graphs
from .ledger import LedgerViolation, check_ledger, settle
from .maxflow import FlowNetwork, max_flow
from .mechanisms import (ClearingLP, ClearingNetwork, Mechanism, clear, clear_greedy,
                         clear_lp_average, clear_maxflow_absolute, clear_random)
from .simplex import LinearProgram, LPError, LPResult, solve_lp

__all__ = [
    "CompatibilityGraphs", "budget_scale", "build_graphs", "LedgerViolation", "check_ledger",
    "settle", "FlowNetwork", "max_flow", "ClearingLP", "ClearingNetwork", "Mechanism", "clear",
    "clear_greedy", "clear_lp_average", "clear_maxflow_absolute", "clear_random",
    "LinearProgram", "LPError", "LPResult", "solve_lp",
]
