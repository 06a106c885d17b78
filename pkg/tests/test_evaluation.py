import csv
import logging

import numpy as np
import pytest

from _builders import case_of, network
from jccopf import evaluation
from jccopf.chance_reform import RiskBudget, std_normal_cdf, std_normal_quantile
from jccopf.grid_model import line_flows
from jccopf.decomposition import FrameworkConfig, FrameworkError, solve_budget
from jccopf.evaluation import (
    compare_methods, dropped_culprits, evaluate_pos, write_cost_csv, write_pos_csv,
    write_trace_csv, write_violations_csv,
)
from jccopf.baselines import solve_no_jcc

CFG = FrameworkConfig(seed=4, n_samples=4000)


def _loose(cov):
    net = network(3, [(1, 2), (2, 3), (1, 3)], gen_buses=(1, 2), wind_buses=(3,),
                  load_buses=(2, 3), horizon=2, limit=1e6)
    return case_of(net, cov)


def test_loose_limits_pos_one():
    case = _loose([[400.0]])
    rep = evaluate_pos(solve_no_jcc(case, CFG), case, n_eval=5000, eval_seed=9)
    assert rep.pos.tolist() == [1.0, 1.0]
    assert rep.all_passed and rep.half_width.tolist() == [0.0, 0.0]


def test_zero_covariance_pos_one(five_bus):
    case = case_of(five_bus.network, np.zeros((2, 2)))
    sched = solve_budget(case, RiskBudget.uniform(case.horizon, range(len(case.views)), 0.01, 1e-4))
    rep = evaluate_pos(sched, case, n_eval=1000, eval_seed=3)
    assert np.all(rep.pos == 1.0)


@pytest.mark.parametrize("rho", [0.1, 0.05])
def test_single_binding_view_matches_gaussian_tail(three_bus, rho):
    budget = RiskBudget(({0: rho},), 1e-4)
    sched = solve_budget(three_bus, budget)
    assert sched.binding == (True,)
    n = 100_000
    rep = evaluate_pos(sched, three_bus, n_eval=n, eval_seed=11)
    # nominal flow sits z_{1-rho} sigma below the upper limit; add the far lower tail
    sens = three_bus.sensitivities
    f0 = line_flows(sens, sched.g[0], three_bus.forecasts[0], three_bus.demands[0])[0]
    sigma = 8.0
    assert f0 == pytest.approx(70 - std_normal_quantile(1 - rho) * sigma)
    exact = 1 - rho - std_normal_cdf((-70 - f0) / sigma)
    assert abs(rep.pos[0] - exact) <= 3 * np.sqrt(rho * (1 - rho) / n)


def test_pos_is_multiple_of_one_over_n(five_bus):
    rep = evaluate_pos(solve_no_jcc(five_bus, CFG), five_bus, n_eval=777, eval_seed=5)
    assert rep.success_counts.dtype.kind == "i"
    assert np.array_equal(rep.pos, rep.success_counts / 777)
    assert np.allclose(rep.pos * 777, np.round(rep.pos * 777), rtol=0, atol=1e-9)


def test_same_seed_warns(five_bus, caplog):
    with caplog.at_level(logging.WARNING):
        evaluate_pos(solve_no_jcc(five_bus, CFG), five_bus, n_eval=100, eval_seed=4, solve_seed=4)
    assert "equals the solve seed" in caplog.text


def test_compare_single_method(five_bus):
    comp = compare_methods(five_bus, CFG, ["no_jcc"], n_eval=2000)
    assert list(comp.cost.objectives) == ["no_jcc"]
    assert comp.cost.gap("no_jcc") == 0.0


def test_compare_records_failures(monkeypatch, five_bus):
    real = evaluation.solve_method

    def broken(m, *a):
        if m == "boole":
            raise FrameworkError("presolve infeasible")
        return real(m, *a)

    monkeypatch.setattr(evaluation, "solve_method", broken)
    comp = compare_methods(five_bus, CFG, ["boole", "iterative"], n_eval=2000)
    assert "boole" in comp.errors and "presolve infeasible" in comp.errors["boole"]
    assert "iterative" in comp.pos
    assert comp.cost.gap("iterative") >= 0


def test_compare_threads_match_serial(five_bus):
    a = compare_methods(five_bus, CFG, n_eval=3000, threads=1)
    b = compare_methods(five_bus, CFG, n_eval=3000, threads=4)
    assert a.cost.objectives == b.cost.objectives
    for m in a.pos:
        assert np.array_equal(a.pos[m].success_counts, b.pos[m].success_counts)


def test_attribution_names_dropped_view(five_bus):
    sched = solve_no_jcc(five_bus, CFG)
    rep = evaluate_pos(sched, five_bus, n_eval=5000, eval_seed=5)
    culprits = dropped_culprits(rep, five_bus)
    assert culprits and all(not a.active for hits in culprits.values() for a in hits)
    assert all(hits for hits in culprits.values())


def test_csv_headers(tmp_path, five_bus):
    comp = compare_methods(five_bus, CFG, ["no_jcc", "iterative"], n_eval=2000)
    write_pos_csv(tmp_path / "pos.csv", comp.pos.values())
    write_cost_csv(tmp_path / "cost.csv", comp.cost)
    write_trace_csv(tmp_path / "trace.csv", comp.schedules["iterative"])
    write_trace_csv(tmp_path / "trace_t.csv", comp.schedules["iterative"], timing=True)
    write_violations_csv(tmp_path / "violations.csv", comp.attribution)
    heads = {p.name: next(csv.reader(open(p))) for p in tmp_path.iterdir()}
    assert heads["pos.csv"] == ["method", "t", "pos", "half_width", "pass"]
    assert heads["cost.csv"] == ["method", "objective", "gap"]
    assert heads["trace.csv"] == ["iter", "objective", "sum_Np", "sum_E"]
    assert heads["trace_t.csv"] == ["iter", "objective", "sum_Np", "sum_E", "wall_ms"]
    assert heads["violations.csv"][:3] == ["method", "t", "view"]
    rows = list(csv.reader(open(tmp_path / "pos.csv")))[1:]
    assert len(rows) == 2 * five_bus.horizon and rows[0][1] == "1"
