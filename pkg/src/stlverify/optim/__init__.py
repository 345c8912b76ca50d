from stlverify.optim.lp import LinearProgram, LpError, LpResult, lp_solve, simplex_solve
from stlverify.optim.milp import (
    CounterexampleMilp,
    MilpResult,
    NodeLimitExceeded,
    find_counterexample,
    milp_branch_and_bound,
)

__all__ = [
    "CounterexampleMilp",
    "LinearProgram",
    "LpError",
    "LpResult",
    "MilpResult",
    "NodeLimitExceeded",
    "find_counterexample",
    "lp_solve",
    "milp_branch_and_bound",
    "simplex_solve",
]
