"""Comparison decompositions: no JCC, Boole, improved Boole, improving bound."""
from __future__ import annotations

import enum

import numpy as np

from .case import Case
from .chance_reform import RiskBudget, clamp_risk
from .decomposition import (
    UNIFORM, DispatchSchedule, FrameworkConfig, FrameworkError, IterationRecord,
    build_violation_matrix, estimate_joint_subset, iterate, presolve, solve_budget,
)
from .qp_solver import QpSolution
from .uncertainty import ScenarioSet, draw_scenarios


class MethodId(str, enum.Enum):
    NO_JCC = "no_jcc"
    BOOLE = "boole"
    IMPROVED_BOOLE = "improved_boole"
    IMPROVING_BOUND = "improving_bound"
    ITERATIVE = "iterative"


ALL_METHODS = tuple(MethodId)


def _finish(res, what: str) -> DispatchSchedule:
    if isinstance(res, QpSolution):
        raise FrameworkError(f"{what} infeasible (status {res.status.value}, "
                             f"rows {list(res.infeasible_rows)})")
    res.trace.append(IterationRecord(0, res.objective, res.budget.active_count, 0.0))
    return res


def solve_no_jcc(case: Case, config: FrameworkConfig) -> DispatchSchedule:
    budget = RiskBudget(tuple({} for _ in range(case.horizon)), config.epsilon)
    return _finish(solve_budget(case, budget, MethodId.NO_JCC.value), "no-JCC OPF")


def solve_boole(case: Case, config: FrameworkConfig) -> DispatchSchedule:
    return presolve(case, config, method=MethodId.BOOLE.value)


def improved_boole_risk(alpha: float, joint: float, n_views: int) -> float:
    return (alpha + joint) / n_views


def solve_improved_boole(case: Case, config: FrameworkConfig,
                         scenarios: ScenarioSet | None = None) -> DispatchSchedule:
    """Boole with the all-views joint violation probability added back.

    The budget per step is ``(alpha + J_t) / |N|`` where ``J_t`` is the
    estimated probability that every view is violated at once under the
    Boole dispatch. Opposite sides of one line cannot both be violated, so
    ``J_t`` is zero for any nonempty monitored set and the result coincides
    with Boole.
    """
    if scenarios is None:
        scenarios = draw_scenarios(case.errors, case.forecasts, config.n_samples, config.seed)
    base = presolve(case, config, method=MethodId.IMPROVED_BOOLE.value)
    all_views = [v.position for v in case.views]
    joints = [estimate_joint_subset(vm, all_views)
              for vm in build_violation_matrix(base.g, scenarios, case)]
    if not any(joints):
        return base
    warnings: list[str] = []
    per_t = []
    for t, j in enumerate(joints):
        risk = clamp_risk(improved_boole_risk(config.alpha, j, len(all_views)), warnings,
                          f"at t={t + 1}")
        per_t.append({n: risk for n in all_views})
    res = _finish(solve_budget(case, RiskBudget(tuple(per_t), config.epsilon),
                               MethodId.IMPROVED_BOOLE.value),
                  "improved-Boole re-solve")
    res.trace = base.trace + [IterationRecord(1, res.objective, res.budget.active_count,
                                              float(np.sum(joints)))]
    res.warnings = warnings
    return res


def solve_improving_bound(case: Case, config: FrameworkConfig,
                          scenarios: ScenarioSet | None = None) -> DispatchSchedule:
    """Classify once at the Boole dispatch, then one uniform re-solve.

    Views found impossible at the Boole dispatch are dropped for good.
    """
    res = iterate(case, config, scenarios, allocation=UNIFORM, max_passes=1,
                  method=MethodId.IMPROVING_BOUND.value)
    if res.status == "infeasible-fallback":
        raise FrameworkError("improving-bound re-solve infeasible: " + "; ".join(res.warnings))
    return res


def solve_method(method, case: Case, config: FrameworkConfig,
                 scenarios: ScenarioSet | None = None) -> DispatchSchedule:
    method = MethodId(method)
    if method is MethodId.NO_JCC:
        return solve_no_jcc(case, config)
    if method is MethodId.BOOLE:
        return solve_boole(case, config)
    if method is MethodId.IMPROVED_BOOLE:
        return solve_improved_boole(case, config, scenarios)
    if method is MethodId.IMPROVING_BOUND:
        return solve_improving_bound(case, config, scenarios)
    return iterate(case, config, scenarios, method=MethodId.ITERATIVE.value)
