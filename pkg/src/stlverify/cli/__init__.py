"""Problem files, benchmark generators and the command-line front end."""

from stlverify.cli.benchmarks import generate_benchmark
from stlverify.cli.outputs import Occupancy, reach_to_json, zono_polygon
from stlverify.cli.problem import (
    ClosedLoopSpec,
    ProblemError,
    ProblemFile,
    dumps_problem,
    load_problem,
    problem_from_dict,
    save_problem,
)

__all__ = [
    "generate_benchmark", "Occupancy", "reach_to_json", "zono_polygon", "ClosedLoopSpec", "ProblemError",
    "ProblemFile", "dumps_problem", "load_problem", "problem_from_dict", "save_problem",
]
