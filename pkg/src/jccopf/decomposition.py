"""Iterative decomposition of the line-flow joint chance constraint.

One fixed scenario set drives every iteration. Each pass classifies the
constraint views against the current dispatch, estimates the
inclusion-exclusion correction ``E`` from the same samples, allocates the
relaxed budget ``alpha + E`` over the possible views and re-solves the OPF.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .case import Case
from .chance_reform import RiskBudget, assemble_opf, clamp_risk
from .grid_model import line_flows
from .qp_solver import QpSolution, solve
from .uncertainty import ScenarioSet, draw_scenarios

logger = logging.getLogger(__name__)

ADAPTIVE = "adaptive"
UNIFORM = "uniform"


class FrameworkError(RuntimeError):
    """The decomposition cannot produce a dispatch at all."""


@dataclass(frozen=True)
class FrameworkConfig:
    alpha: float = 0.05
    epsilon: float = 1e-4
    n_samples: int = 20_000
    seed: int = 0
    tol: float = 1e-5
    max_iter: int = 50

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 0.5), got {self.alpha!r}")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class ViolationMatrix:
    """Strict violation indicators for one time step, shape (views, samples)."""
    indicators: np.ndarray

    def __post_init__(self):
        ind = np.array(self.indicators, dtype=bool)
        if ind.ndim != 2:
            raise ValueError("indicators must be 2-D (views, samples)")
        ind.setflags(write=False)
        object.__setattr__(self, "indicators", ind)

    @property
    def n_views(self) -> int:
        return self.indicators.shape[0]

    @property
    def n_samples(self) -> int:
        return self.indicators.shape[1]

    @classmethod
    def from_values(cls, values, bounds):
        """Indicators ``values > bounds``; ``values`` has shape (views, samples)."""
        values = np.asarray(values, dtype=float)
        bounds = np.asarray(bounds, dtype=float).reshape(-1, 1)
        return cls(values > bounds)


@dataclass(frozen=True)
class Classification:
    counts: np.ndarray
    n_samples: int

    @property
    def marginals(self) -> np.ndarray:
        return self.counts / self.n_samples

    @property
    def possible(self) -> tuple[int, ...]:
        return tuple(int(n) for n in np.flatnonzero(self.counts > 0))


@dataclass(frozen=True)
class EstimationResult:
    union_count: int
    marginal_sum_count: int
    n_samples: int

    @property
    def e_count(self) -> int:
        return self.marginal_sum_count - self.union_count

    @property
    def union(self) -> float:
        return self.union_count / self.n_samples

    @property
    def E(self) -> float:
        return self.e_count / self.n_samples


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    objective: float
    sum_np: int
    sum_e: float
    wall_ms: float = field(default=0.0, compare=False)


@dataclass
class DispatchSchedule:
    """Generator outputs ``g`` (horizon x N_g) and how they were obtained."""
    g: np.ndarray
    objective: float
    budget: RiskBudget
    binding: tuple[bool, ...]
    method: str = ""
    status: str = "optimal"
    trace: list[IterationRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    solution: QpSolution | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def active_views(self, t: int) -> tuple[int, ...]:
        return tuple(self.budget.line_risk[t])


def solve_budget(case: Case, budget: RiskBudget, method: str = "") -> DispatchSchedule | QpSolution:
    """Solve the OPF under ``budget``; returns the bare QpSolution if not optimal."""
    opf = assemble_opf(case, budget)
    sol = solve(opf.qp)
    if not sol.optimal:
        return sol
    A, b = opf.qp.A, opf.qp.b
    slack = b - A @ sol.x
    binding = [False] * case.horizon
    for (t, _), row in opf.line_rows.items():
        if slack[row] <= 1e-6 * (1.0 + abs(b[row])):
            binding[t] = True
    return DispatchSchedule(opf.dispatch(sol.x), sol.objective, budget, tuple(binding),
                            method=method, solution=sol)


def presolve(case: Case, config: FrameworkConfig, method: str = "boole") -> DispatchSchedule:
    """Every view active at the uniform Boole risk ``alpha / |N|``."""
    views = [v.position for v in case.views]
    budget = RiskBudget.uniform(case.horizon, views, config.alpha / len(views), config.epsilon)
    res = solve_budget(case, budget, method)
    if isinstance(res, QpSolution):
        raise FrameworkError(f"presolve infeasible (status {res.status.value}, "
                             f"rows {list(res.infeasible_rows)})")
    res.trace.append(IterationRecord(0, res.objective, budget.active_count, 0.0))
    return res


def build_violation_matrix(g, scenarios: ScenarioSet, case: Case) -> list[ViolationMatrix]:
    """Per-time-step indicators of every view against every wind sample."""
    g = np.asarray(g, dtype=float)
    if g.shape[0] != scenarios.horizon or scenarios.horizon != case.horizon:
        raise ValueError(f"horizon mismatch: dispatch {g.shape[0]}, scenarios "
                         f"{scenarios.horizon}, case {case.horizon}")
    sens = case.sensitivities
    line_pos = np.array([v.position // 2 for v in case.views])
    signs = np.array([v.sign for v in case.views], dtype=float)
    bounds = np.array([v.bound for v in case.views])
    out = []
    for t in range(case.horizon):
        flows = line_flows(sens, g[t], scenarios[t], case.demands[t])
        values = flows[:, line_pos].T * signs[:, None]
        out.append(ViolationMatrix.from_values(values, bounds))
    return out


def classify(vm: ViolationMatrix) -> Classification:
    return Classification(vm.indicators.sum(axis=1), vm.n_samples)


def _subset_count(vm: ViolationMatrix, subset: Sequence[int]) -> int:
    subset = list(subset)
    if not subset:
        raise ValueError("subset of views must be nonempty")
    return int(np.count_nonzero(np.logical_and.reduce(vm.indicators[subset], axis=0)))


def estimate_joint_subset(vm: ViolationMatrix, subset: Sequence[int]) -> float:
    """Fraction of samples on which every view in ``subset`` is violated."""
    return _subset_count(vm, subset) / vm.n_samples


def estimate_E(vm: ViolationMatrix, possible: Sequence[int]) -> EstimationResult:
    """Inclusion-exclusion correction via one union count.

    On a fixed empirical measure the alternating subset sum telescopes to
    ``sum of marginals - union``, so no enumeration is needed.
    """
    possible = list(possible)
    if not possible:
        return EstimationResult(0, 0, vm.n_samples)
    rows = vm.indicators[possible]
    union = int(np.count_nonzero(rows.any(axis=0)))
    return EstimationResult(union, int(rows.sum()), vm.n_samples)


def inclusion_exclusion_count(vm: ViolationMatrix, possible: Sequence[int]) -> int:
    """``E * N_s`` by explicit enumeration of all subsets of size >= 2.

    Exponential in ``len(possible)``; kept as an independent check on
    :func:`estimate_E`.
    """
    rows = vm.indicators[list(possible)]
    total = 0
    # depth-first over subsets in index order, carrying the running intersection
    stack = [(k, rows[k], 1) for k in range(len(rows))]
    while stack:
        last, inter, size = stack.pop()
        if size >= 2:
            total += (1 if size % 2 == 0 else -1) * int(np.count_nonzero(inter))
        if not inter.any():
            continue  # every superset is empty too
        for k in range(last + 1, len(rows)):
            stack.append((k, inter & rows[k], size + 1))
    return total


def allocate_risk(cls: Classification) -> dict[int, float]:
    """Factors proportional to the estimated marginals of the possible views."""
    possible = cls.possible
    if not possible:
        return {}
    counts = cls.counts[list(possible)].astype(float)
    betas = counts / counts.sum()
    betas[-1] = 1.0 - betas[:-1].sum()
    return dict(zip(possible, betas.tolist()))


def allocate_uniform(cls: Classification) -> dict[int, float]:
    possible = cls.possible
    if not possible:
        return {}
    beta = 1.0 / len(possible)
    return {n: beta for n in possible}


@dataclass(frozen=True)
class PassState:
    """What one classification/estimation pass saw at a given dispatch."""
    classifications: tuple[Classification, ...]
    estimates: tuple[EstimationResult, ...]
    allocations: tuple[dict, ...]

    @property
    def sum_np(self) -> int:
        return sum(len(c.possible) for c in self.classifications)

    @property
    def sum_e(self) -> float:
        return float(sum(e.E for e in self.estimates))


def analyze(g, scenarios: ScenarioSet, case: Case, allocation: str = ADAPTIVE) -> PassState:
    """Classification, estimation and risk allocation at dispatch ``g``."""
    alloc = allocate_risk if allocation == ADAPTIVE else allocate_uniform
    cls, est, betas = [], [], []
    for vm in build_violation_matrix(g, scenarios, case):
        c = classify(vm)
        cls.append(c)
        est.append(estimate_E(vm, c.possible))
        betas.append(alloc(c))
    return PassState(tuple(cls), tuple(est), tuple(betas))


def budget_from_pass(state: PassState, config: FrameworkConfig, warnings: list | None = None) -> RiskBudget:
    per_t = []
    for t, (est, betas) in enumerate(zip(state.estimates, state.allocations)):
        relaxed = config.alpha + est.E
        per_t.append({n: clamp_risk(beta * relaxed, warnings, f"for view {n + 1} at t={t + 1}")
                      for n, beta in betas.items()})
    return RiskBudget(tuple(per_t), config.epsilon)


def iterate(case: Case, config: FrameworkConfig, scenarios: ScenarioSet | None = None,
            allocation: str = ADAPTIVE, max_passes: int | None = None,
            method: str = "iterative") -> DispatchSchedule:
    """Run presolve followed by classify/estimate/allocate/re-solve passes.

    Stops when the relative objective change drops below ``config.tol``.
    A failed re-solve keeps the previous dispatch and stops with status
    ``"infeasible-fallback"``; exhausting the pass budget yields
    ``"not-converged"`` (or ``"single-pass"`` when ``max_passes == 1``).
    """
    if allocation not in (ADAPTIVE, UNIFORM):
        raise ValueError(f"unknown allocation {allocation!r}")
    start = time.perf_counter()
    if scenarios is None:
        scenarios = draw_scenarios(case.errors, case.forecasts, config.n_samples, config.seed)
    current = presolve(case, config, method=method)
    trace = list(current.trace)
    trace[0] = IterationRecord(0, current.objective, trace[0].sum_np, 0.0,
                               (time.perf_counter() - start) * 1e3)
    warnings: list[str] = []
    passes = config.max_iter if max_passes is None else max_passes
    status = "single-pass" if passes == 1 else "not-converged"

    for k in range(1, passes + 1):
        state = analyze(current.g, scenarios, case, allocation)
        budget = budget_from_pass(state, config, warnings)
        nxt = solve_budget(case, budget, method)
        if isinstance(nxt, QpSolution):
            msg = (f"re-solve {k} {nxt.status.value}; keeping previous dispatch "
                   f"(rows {list(nxt.infeasible_rows)})")
            logger.warning(msg)
            warnings.append(msg)
            status = "infeasible-fallback"
            break
        trace.append(IterationRecord(k, nxt.objective, state.sum_np, state.sum_e,
                                     (time.perf_counter() - start) * 1e3))
        change = abs(nxt.objective - current.objective) / max(abs(current.objective), 1.0)
        current = nxt
        if change < config.tol and passes > 1:
            status = "converged"
            break

    current.method = method
    current.status = status
    current.trace = trace
    current.warnings = warnings
    return current
