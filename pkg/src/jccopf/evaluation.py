"""Monte Carlo probability of success, cost comparison and violation attribution."""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import ALL_METHODS, MethodId, solve_method
from .case import Case
from .decomposition import DispatchSchedule, FrameworkConfig, build_violation_matrix
from .uncertainty import ScenarioSet, draw_scenarios

logger = logging.getLogger(__name__)

N_EVAL_DEFAULT = 100_000
NUMBER_FORMAT = ".10g"


def fmt(x) -> str:
    return format(float(x), NUMBER_FORMAT)


def eval_threads() -> int:
    try:
        return max(1, int(os.environ.get("JCCOPF_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class PosReport:
    """Probability of success per time step for one dispatch.

    ``view_violation[t, n]`` is the violation frequency of view ``n``.
    """
    method: str
    alpha: float
    n_eval: int
    success_counts: np.ndarray
    view_violation: np.ndarray
    binding: tuple[bool, ...]
    active: tuple[tuple[int, ...], ...]

    @property
    def pos(self) -> np.ndarray:
        return self.success_counts / self.n_eval

    @property
    def half_width(self) -> np.ndarray:
        p = self.pos
        return 3.0 * np.sqrt(p * (1.0 - p) / self.n_eval)

    @property
    def passed(self) -> np.ndarray:
        return self.pos >= 1.0 - self.alpha - self.half_width

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))


def evaluation_scenarios(case: Case, n_eval: int, eval_seed: int,
                         solve_seed: int | None = None) -> ScenarioSet:
    if solve_seed is not None and eval_seed == solve_seed:
        logger.warning("evaluation seed %d equals the solve seed; PoS will be optimistic", eval_seed)
    return draw_scenarios(case.errors, case.forecasts, n_eval, eval_seed)


def evaluate_pos(schedule: DispatchSchedule, case: Case, n_eval: int = N_EVAL_DEFAULT,
                 eval_seed: int = 1, alpha: float = 0.05, scenarios: ScenarioSet | None = None,
                 solve_seed: int | None = None) -> PosReport:
    """Fraction of fresh scenarios with every monitored flow inside its limits."""
    if scenarios is None:
        scenarios = evaluation_scenarios(case, n_eval, eval_seed, solve_seed)
    vms = build_violation_matrix(schedule.g, scenarios, case)
    success = np.array([vm.n_samples - np.count_nonzero(vm.indicators.any(axis=0)) for vm in vms])
    per_view = np.array([vm.indicators.mean(axis=1) for vm in vms])
    active = tuple(schedule.active_views(t) for t in range(case.horizon))
    return PosReport(schedule.method, alpha, scenarios.count, success, per_view,
                     tuple(schedule.binding), active)


@dataclass(frozen=True)
class Attribution:
    method: str
    t: int
    view: int
    line_id: int
    direction: str
    violation_prob: float
    active: bool


def attribute_violations(report: PosReport, case: Case) -> list[Attribution]:
    """Every (time step, view) with nonzero evaluated violation frequency."""
    rows = []
    for t in range(report.view_violation.shape[0]):
        for n in np.flatnonzero(report.view_violation[t] > 0):
            v = case.views[n]
            rows.append(Attribution(report.method, t, int(n), v.line_id, v.direction,
                                    float(report.view_violation[t, n]), int(n) in report.active[t]))
    return rows


def dropped_culprits(report: PosReport, case: Case) -> dict[int, list[Attribution]]:
    """For each failing time step, the violated views that were left out of the solve."""
    out = {}
    attr = attribute_violations(report, case)
    for t in np.flatnonzero(~report.passed):
        hits = [a for a in attr if a.t == t and not a.active]
        out[int(t)] = sorted(hits, key=lambda a: -a.violation_prob)
    return out


@dataclass
class CostReport:
    objectives: dict[str, float]
    reference: float

    def gap(self, method: str) -> float:
        return (self.objectives[method] - self.reference) / max(abs(self.reference), 1e-12)


@dataclass
class Comparison:
    cost: CostReport
    pos: dict[str, PosReport]
    schedules: dict[str, DispatchSchedule]
    attribution: list[Attribution] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)


def compare_methods(case: Case, config: FrameworkConfig, methods: Iterable = ALL_METHODS,
                    n_eval: int = N_EVAL_DEFAULT, eval_seed: int | None = None,
                    threads: int | None = None) -> Comparison:
    """Solve with each method and evaluate all of them on one fresh scenario set."""
    methods = [MethodId(m).value for m in methods]
    if eval_seed is None:
        eval_seed = config.seed + 1
    solve_scen = draw_scenarios(case.errors, case.forecasts, config.n_samples, config.seed)
    eval_scen = evaluation_scenarios(case, n_eval, eval_seed, config.seed)
    wanted = list(dict.fromkeys([MethodId.NO_JCC.value] + methods))

    def run(m):
        try:
            return m, solve_method(m, case, config, solve_scen), None
        except Exception as exc:  # noqa: BLE001 - one method's failure must not stop the rest
            logger.error("method %s failed: %s", m, exc)
            return m, None, f"{type(exc).__name__}: {exc}"

    workers = threads or eval_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, wanted))
    else:
        results = [run(m) for m in wanted]

    schedules, errors = {}, {}
    for m, sched, err in results:
        if err is not None:
            errors[m] = err
        else:
            schedules[m] = sched
    reference = schedules[MethodId.NO_JCC.value].objective if MethodId.NO_JCC.value in schedules \
        else float("nan")
    objectives = {m: schedules[m].objective for m in methods if m in schedules}
    pos, attribution = {}, []
    for m in methods:
        if m in schedules:
            pos[m] = evaluate_pos(schedules[m], case, alpha=config.alpha, scenarios=eval_scen)
            attribution.extend(attribute_violations(pos[m], case))
    return Comparison(CostReport(objectives, reference), pos,
                      {m: s for m, s in schedules.items() if m in methods},
                      attribution, {m: e for m, e in errors.items() if m in methods})


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)


def write_pos_csv(path, reports: Iterable[PosReport]) -> None:
    rows = []
    for r in reports:
        for t in range(len(r.pos)):
            rows.append([r.method, t + 1, fmt(r.pos[t]), fmt(r.half_width[t]), int(r.passed[t])])
    _write(Path(path), ["method", "t", "pos", "half_width", "pass"], rows)


def write_cost_csv(path, cost: CostReport) -> None:
    rows = [[m, fmt(f), fmt(cost.gap(m))] for m, f in cost.objectives.items()]
    _write(Path(path), ["method", "objective", "gap"], rows)


def write_trace_csv(path, schedule: DispatchSchedule, timing: bool = False) -> None:
    """Per-solve trace; ``wall_ms`` is only written when ``timing`` is set."""
    header = ["iter", "objective", "sum_Np", "sum_E"] + (["wall_ms"] if timing else [])
    rows = []
    for rec in schedule.trace:
        row = [rec.iter, fmt(rec.objective), rec.sum_np, fmt(rec.sum_e)]
        if timing:
            row.append(f"{rec.wall_ms:.3f}")
        rows.append(row)
    _write(Path(path), header, rows)


def write_violations_csv(path, attribution: Iterable[Attribution]) -> None:
    rows = [[a.method, a.t + 1, a.view + 1, a.line_id, a.direction, fmt(a.violation_prob),
             int(a.active)] for a in attribution]
    _write(Path(path), ["method", "t", "view", "line_id", "direction", "violation_prob", "active"],
           rows)
