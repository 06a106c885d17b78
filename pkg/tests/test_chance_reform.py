import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _builders import case_of, network
from jccopf.chance_reform import (
    RISK_MAX, RiskBudget, RiskError, assemble_opf, balance_margin, clamp_risk,
    std_normal_cdf, std_normal_quantile, tighten_line_scc,
)
from jccopf.decomposition import FrameworkConfig
from jccopf.baselines import solve_boole, solve_no_jcc
from jccopf.grid_model import ConstraintView, SensitivityMatrix
from jccopf.qp_solver import kkt_residuals


def mp_quantile(p):
    mpmath.mp.dps = 40
    return float(-mpmath.sqrt(2) * mpmath.erfinv(1 - 2 * mpmath.mpf(p)))


@pytest.mark.parametrize("p, z", [(0.5, 0.0), (0.95, 1.6448536269514722), (0.9999, 3.7190164854556804)])
def test_quantile_known_values(p, z):
    assert std_normal_quantile(p) == pytest.approx(z, abs=1e-12)


@given(st.floats(1e-12, 1 - 1e-12))
@settings(max_examples=300, deadline=None)
def test_quantile_matches_mpmath(p):
    ref = mp_quantile(p)
    assert std_normal_quantile(p) == pytest.approx(ref, rel=1e-10, abs=1e-10)


@given(st.floats(-8, 0))
def test_cdf_inverts_quantile(z):
    # lower half only: near p = 1 the CDF itself rounds away the tail
    assert std_normal_quantile(std_normal_cdf(z)) == pytest.approx(z, abs=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_quantile_domain(p):
    with pytest.raises(RiskError):
        std_normal_quantile(p)


def _single_line(lam_w, lam_g=(1.0,), bound=10.0, sign=1):
    sens = SensitivityMatrix((1,), np.array([lam_g]), np.array([lam_w]), np.zeros((1, 1)))
    return sens, ConstraintView(0 if sign > 0 else 1, 1, sign, bound)


def test_line_margin_unit_variance():
    sens, view = _single_line([1.0, 0.0])
    tc = tighten_line_scc(view, 0, 0.05, sens, np.eye(2), [0.0, 0.0], [0.0])
    assert tc.sigma == pytest.approx(1.0)
    assert tc.margin == pytest.approx(1.6448536269514722, abs=1e-12)
    assert tc.rhs == pytest.approx(10.0 - 1.6448536269514722)


def test_line_rhs_includes_forecast_and_sign():
    sens, view = _single_line([0.5], bound=20.0, sign=-1)
    tc = tighten_line_scc(view, 0, 0.5, sens, [[4.0]], [10.0], [0.0])
    # -flow <= 20 with nominal wind contribution 5 and zero margin at risk 0.5
    assert tc.margin == 0.0
    assert tc.rhs == pytest.approx(25.0)
    assert tc.row.tolist() == [-1.0]


def test_margin_zero_for_zero_covariance():
    sens, view = _single_line([1.0, 2.0])
    tc = tighten_line_scc(view, 0, 0.01, sens, np.zeros((2, 2)), [0.0, 0.0], [0.0])
    assert tc.margin == 0.0


@given(st.floats(1e-6, 0.49), st.floats(1e-6, 0.49))
def test_margin_decreases_with_risk(r1, r2):
    sens, view = _single_line([1.0])
    lo, hi = sorted((r1, r2))
    m_lo = tighten_line_scc(view, 0, lo, sens, [[9.0]], [0.0], [0.0]).margin
    m_hi = tighten_line_scc(view, 0, hi, sens, [[9.0]], [0.0], [0.0]).margin
    assert m_lo >= m_hi >= 0.0


def test_balance_margin_value():
    # 1' cov 1 = 4 -> sigma 2
    cov = np.array([[1.0, 0.5], [0.5, 2.0]])
    assert balance_margin(1e-4, cov) == pytest.approx(2 * 3.7190164854556804, abs=1e-10)


@pytest.mark.parametrize("risk", [0.0, -0.01, 0.51])
def test_bad_risk_rejected(risk):
    sens, view = _single_line([1.0])
    with pytest.raises(RiskError):
        tighten_line_scc(view, 0, risk, sens, [[1.0]], [0.0], [0.0])


def test_clamp_records_warning():
    notes = []
    assert clamp_risk(0.7, notes, "for view 3") == RISK_MAX
    assert clamp_risk(0.2, notes) == 0.2
    assert len(notes) == 1 and "view 3" in notes[0]


def test_assemble_row_counts():
    net = network(2, [(1, 2)], gen_buses=(1,), wind_buses=(2,), load_buses=(2,))
    opf = assemble_opf(case_of(net), RiskBudget(({},), 1e-4))
    assert opf.qp.A.shape == (3, 1)  # cap up, cap down, balance
    net2 = network(2, [(1, 2)], gen_buses=(1,), wind_buses=(2,), load_buses=(2,), horizon=2)
    opf2 = assemble_opf(case_of(net2), RiskBudget(({0: 0.05}, {}), 1e-4))
    labels = [lab[0] for lab in opf2.qp.row_labels]
    assert labels.count("ramp_up") + labels.count("ramp_dn") == 2
    assert labels.count("line") == 1 and list(opf2.line_rows) == [(0, 0)]


def test_assemble_rejects_wrong_budget_length():
    net = network(2, [(1, 2)], gen_buses=(1,), wind_buses=(2,), load_buses=(2,), horizon=2)
    with pytest.raises(ValueError):
        assemble_opf(case_of(net), RiskBudget(({},), 1e-4))


def test_three_bus_no_jcc_by_hand(three_bus):
    # cheap unit covers net load plus the balance margin; unit 2 stays off
    sched = solve_no_jcc(three_bus, FrameworkConfig())
    z = std_normal_quantile(1 - 1e-4)
    assert sched.g[0, 0] == pytest.approx(120 + z * 12, abs=1e-6)
    assert sched.g[0, 1] == pytest.approx(0.0, abs=1e-6)


def test_three_bus_boole_by_hand(three_bus):
    # flow(1->3) = (2 (d - w) - g2) / 3, sigma = 2/3 * 12 = 8; the upper view binds
    sched = solve_boole(three_bus, FrameworkConfig(alpha=0.05))
    z = std_normal_quantile(1 - 0.025)
    g2 = 3 * (2 * 120 / 3 - (70 - z * 8))
    g1 = 120 + std_normal_quantile(1 - 1e-4) * 12 - g2
    assert g2 == pytest.approx(77.0391, abs=1e-4)
    assert sched.g[0, 1] == pytest.approx(g2, abs=1e-5)
    assert sched.g[0, 0] == pytest.approx(g1, abs=1e-5)
    expected = 0.01 * g1**2 + 10 * g1 + 0.02 * g2**2 + 15 * g2
    assert sched.objective == pytest.approx(expected, rel=1e-9)
    assert sched.objective == pytest.approx(2226.896663, abs=1e-5)
    assert sched.binding == (True,)
    opf = assemble_opf(three_bus, sched.budget)
    assert max(kkt_residuals(opf.qp, sched.solution.x, sched.solution.multipliers)) <= 1e-6
