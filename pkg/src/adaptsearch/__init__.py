"""Adaptive Search for permutation problems, sequential and parallel."""

from adaptsearch.engine import Engine, EngineParams, RunStats, SolveOutcome, solve
from adaptsearch.problems import (Configuration, ProblemKind, ProblemSpec, build_problem,
                                  delta_cost_swap, full_cost, is_solution, variable_errors)
from adaptsearch.runtime import ParallelOutcome, ParallelParams, run_parallel

__all__ = [
    "Configuration", "Engine", "EngineParams", "ParallelOutcome", "ParallelParams",
    "ProblemKind", "ProblemSpec", "RunStats", "SolveOutcome", "build_problem",
    "delta_cost_swap", "full_cost", "is_solution", "run_parallel", "solve", "variable_errors",
]
__version__ = "0.1.0"
