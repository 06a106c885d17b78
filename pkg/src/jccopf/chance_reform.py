"""Gaussian reformulation of single chance constraints and OPF assembly.

Generators carry no recourse, so every tightening is a constant margin
``z_{1-risk} * sigma`` subtracted from a nominal (forecast) linear row.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .case import Case
from .grid_model import ConstraintView, SensitivityMatrix
from .qp_solver import QuadraticProgram

logger = logging.getLogger(__name__)

RISK_MAX = 0.5

# Acklam's rational approximation of the standard normal quantile.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


class RiskError(ValueError):
    """Probability or risk level outside its admissible range."""


def _poly(coef, x):
    acc = 0.0
    for a in coef:
        acc = acc * x + a
    return acc


def std_normal_quantile(p: float) -> float:
    """Inverse of the standard normal CDF.

    Rational approximation (relative error about 1e-9) refined by one Halley
    step on ``Phi(z) - p``, which brings the error to machine precision.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise RiskError(f"quantile needs 0 < p < 1, got {p!r}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        z = _poly(_C, q) / (_poly(_D, q) * q + 1.0)
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        z = _poly(_A, r) * q / (_poly(_B, r) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        z = -_poly(_C, q) / (_poly(_D, q) * q + 1.0)
    # Halley step; the upper tail is refined through the complement to keep precision
    if p > 0.5:
        err = 0.5 * math.erfc(z / math.sqrt(2.0)) - (1.0 - p)
        err = -err
    else:
        err = 0.5 * math.erfc(-z / math.sqrt(2.0)) - p
    u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * z * z)
    return z - u / (1.0 + 0.5 * z * u)


def std_normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _check_risk(risk: float, upper: float = RISK_MAX, name: str = "risk") -> float:
    risk = float(risk)
    if not 0.0 < risk <= upper:
        raise RiskError(f"{name} must lie in (0, {upper}], got {risk!r}")
    return risk


@dataclass(frozen=True)
class TightenedConstraint:
    """``row @ g_t <= rhs``, already net of the ``margin`` back-off."""
    view: int
    t: int
    risk: float
    sigma: float
    margin: float
    row: np.ndarray
    rhs: float


def line_sigma(sens: SensitivityMatrix, line_pos: int, cov) -> float:
    lam = sens.lam_w[line_pos]
    return math.sqrt(max(0.0, float(lam @ np.asarray(cov) @ lam)))


def tighten_line_scc(view: ConstraintView, t: int, risk: float, sens: SensitivityMatrix,
                     cov, w_forecast, d_t) -> TightenedConstraint:
    """Deterministic equivalent of ``P(sign * flow > bound) <= risk``."""
    risk = _check_risk(risk)
    k = view.position // 2
    sigma = line_sigma(sens, k, cov)
    margin = std_normal_quantile(1.0 - risk) * sigma if risk < RISK_MAX else 0.0
    fixed = sens.lam_w[k] @ np.asarray(w_forecast, float) + sens.lam_d[k] @ np.asarray(d_t, float)
    row = view.sign * sens.lam_g[k]
    rhs = view.bound - view.sign * fixed - margin
    return TightenedConstraint(view.position, t, risk, sigma, margin, row, float(rhs))


def balance_margin(eps: float, cov) -> float:
    eps = _check_risk(eps, name="epsilon")
    if eps >= 0.5:
        return 0.0
    total = float(np.sum(np.asarray(cov)))
    return std_normal_quantile(1.0 - eps) * math.sqrt(max(0.0, total))


def tighten_balance_scc(t: int, eps: float, cov, w_forecast, d_t, n_gen: int):
    """Row for ``1'g >= 1'd - 1'w + z_{1-eps} sqrt(1' cov 1)`` as ``row @ g <= rhs``."""
    margin = balance_margin(eps, cov)
    row = -np.ones(n_gen)
    rhs = float(np.sum(w_forecast) - np.sum(d_t)) - margin
    return row, rhs, margin


@dataclass(frozen=True)
class RiskBudget:
    """Per-time-step risk for each active view (0-based view positions).

    Views absent from ``line_risk[t]`` are not constrained at step ``t``.
    """
    line_risk: tuple[Mapping[int, float], ...]
    epsilon: float

    def __post_init__(self):
        _check_risk(self.epsilon, upper=0.5, name="epsilon")
        frozen = []
        for per_t in self.line_risk:
            per_t = {int(n): _check_risk(r) for n, r in sorted(per_t.items())}
            frozen.append(per_t)
        object.__setattr__(self, "line_risk", tuple(frozen))

    @classmethod
    def uniform(cls, horizon: int, views: Sequence[int], risk: float, epsilon: float):
        return cls(tuple({n: risk for n in views} for _ in range(horizon)), epsilon)

    @property
    def active_count(self) -> int:
        return sum(len(r) for r in self.line_risk)


def clamp_risk(risk: float, warnings: list | None = None, label: str = "") -> float:
    """Cap an allocated risk at ``RISK_MAX``, recording a warning if capped."""
    if risk > RISK_MAX:
        msg = f"risk {risk:.6g}{' ' + label if label else ''} clamped to {RISK_MAX}"
        logger.warning(msg)
        if warnings is not None:
            warnings.append(msg)
        return RISK_MAX
    return risk


@dataclass(frozen=True)
class OpfProblem:
    """An assembled QP together with bookkeeping to read the solution."""
    qp: QuadraticProgram
    n_gen: int
    horizon: int
    line_rows: dict = field(default_factory=dict)  # (t, view) -> row index
    balance_rows: tuple = ()

    def dispatch(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float).reshape(self.horizon, self.n_gen)


def assemble_opf(case: Case, budget: RiskBudget, active_views=None) -> OpfProblem:
    """Multi-period economic dispatch QP with tightened line and balance rows.

    Variables are ``g[t, j]`` flattened time-major. Row order: capacity
    upper/lower per (t, j), ramp up/down per (t, j) transition, one balance
    row per t, then line rows per (t, view) in ascending view order.
    """
    net = case.network
    T = net.horizon
    if T < 1:
        raise ValueError("empty horizon")
    if len(budget.line_risk) != T:
        raise ValueError(f"risk budget covers {len(budget.line_risk)} steps, horizon is {T}")
    if active_views is not None:
        for t, views in enumerate(active_views):
            missing = set(views) - set(budget.line_risk[t])
            if missing:
                raise ValueError(f"no risk budget for views {sorted(missing)} at t={t}")

    gens = net.generators
    G = len(gens)
    g_min = np.array([g.g_min for g in gens])
    g_max = np.array([g.g_max for g in gens])
    r_dn = np.array([g.ramp_down for g in gens])
    r_up = np.array([g.ramp_up for g in gens])
    n = G * T

    rows, rhs, labels = [], [], []

    def add(coefs: dict, bound: float, label):
        r = np.zeros(n)
        for idx, v in coefs.items():
            r[idx] += v
        rows.append(r)
        rhs.append(bound)
        labels.append(label)

    for t in range(T):
        for j in range(G):
            add({t * G + j: 1.0}, g_max[j], ("cap_up", t, gens[j].id))
            add({t * G + j: -1.0}, -g_min[j], ("cap_dn", t, gens[j].id))
    for t in range(T - 1):
        for j in range(G):
            add({(t + 1) * G + j: 1.0, t * G + j: -1.0}, r_up[j], ("ramp_up", t, gens[j].id))
            add({(t + 1) * G + j: -1.0, t * G + j: 1.0}, -r_dn[j], ("ramp_dn", t, gens[j].id))

    balance_rows = []
    for t in range(T):
        row, b, _ = tighten_balance_scc(t, budget.epsilon, case.covariance(t),
                                        case.forecasts[t], case.demands[t], G)
        balance_rows.append(len(rows))
        add({t * G + j: row[j] for j in range(G)}, b, ("balance", t))

    line_rows = {}
    sens = case.sensitivities
    for t in range(T):
        for pos, risk in budget.line_risk[t].items():
            tc = tighten_line_scc(case.views[pos], t, risk, sens, case.covariance(t),
                                  case.forecasts[t], case.demands[t])
            line_rows[(t, pos)] = len(rows)
            add({t * G + j: tc.row[j] for j in range(G)}, tc.rhs, ("line", t, pos))

    q = np.tile([g.c2 for g in gens], T)
    c = np.tile([g.c1 for g in gens], T)
    offset = T * sum(g.c0 for g in gens)
    qp = QuadraticProgram(q, c, np.array(rows).reshape(-1, n), np.array(rhs), offset, tuple(labels))
    return OpfProblem(qp, G, T, line_rows, tuple(balance_rows))
