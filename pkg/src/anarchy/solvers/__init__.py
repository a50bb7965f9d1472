from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, LPSolution, solve_lp
from .matching import WeightMatrix, max_weight_perfect_matching
from .maxflow import CapacitatedDigraph, MaxFlowResult, max_flow

__all__ = [
    "LinearProgram",
    "LPSolution",
    "solve_lp",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "WeightMatrix",
    "max_weight_perfect_matching",
    "CapacitatedDigraph",
    "MaxFlowResult",
    "max_flow",
]
