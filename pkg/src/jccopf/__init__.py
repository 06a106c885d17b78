"""Chance-constrained DC-OPF with an iterative joint-chance-constraint decomposition."""
from .baselines import (
    ALL_METHODS, MethodId, solve_boole, solve_improved_boole, solve_improving_bound,
    solve_method, solve_no_jcc,
)
from .case import Case
from .casefile import CaseError, RunConfig, load_shipped_case, parse_case, write_case
from .decomposition import DispatchSchedule, FrameworkConfig, FrameworkError, iterate, presolve
from .evaluation import compare_methods, evaluate_pos
from .grid_model import Network, build_ptdf, constraint_views, line_flows
from .uncertainty import ErrorModel, draw_scenarios

__all__ = [
    "ALL_METHODS", "Case", "CaseError", "DispatchSchedule", "ErrorModel", "FrameworkConfig",
    "FrameworkError", "MethodId", "Network", "RunConfig", "build_ptdf", "compare_methods",
    "constraint_views", "draw_scenarios", "evaluate_pos", "iterate", "line_flows",
    "load_shipped_case", "parse_case", "presolve", "solve_boole", "solve_improved_boole",
    "solve_improving_bound", "solve_method", "solve_no_jcc", "write_case",
]
