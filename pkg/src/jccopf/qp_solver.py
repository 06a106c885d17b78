"""Dense convex QP solver for separable quadratic costs.

Problem form::

    minimize    sum(q * x**2) + c @ x + offset
    subject to  A @ x <= b

Solved with a Mehrotra predictor-corrector interior point method on a
row-normalized copy of the problem, followed by an active-set polish that
re-solves the equality-constrained KKT system on the identified active rows.
When the interior point iteration stalls, a phase-I problem measures the
least achievable infeasibility and names the rows that stay violated there.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class QpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration-limit"


@dataclass(frozen=True)
class QuadraticProgram:
    q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    offset: float = 0.0
    row_labels: tuple = ()

    def __post_init__(self):
        q = np.array(self.q, dtype=float).ravel()
        c = np.array(self.c, dtype=float).ravel()
        n = q.size
        A = np.array(self.A, dtype=float).reshape(-1, n)
        b = np.array(self.b, dtype=float).ravel()
        if c.size != n:
            raise ValueError(f"c has length {c.size}, expected {n}")
        if b.size != A.shape[0]:
            raise ValueError(f"b has length {b.size}, A has {A.shape[0]} rows")
        if np.any(q < 0):
            raise ValueError("quadratic coefficients must be nonnegative")
        for name, arr in (("q", q), ("c", c), ("A", A), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "row_labels", tuple(self.row_labels))

    @property
    def n_vars(self) -> int:
        return self.q.size

    @property
    def n_rows(self) -> int:
        return self.b.size

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.q @ (x * x) + self.c @ x + self.offset)


@dataclass
class QpSolution:
    x: np.ndarray
    objective: float
    status: QpStatus
    multipliers: np.ndarray
    primal_residual: float
    dual_residual: float
    complementarity: float
    iterations: int
    infeasible_rows: tuple[int, ...] = field(default_factory=tuple)
    min_infeasibility: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def kkt_residuals(qp: QuadraticProgram, x, mu) -> tuple[float, float, float]:
    """Return (max violation, stationarity inf-norm, |mu . (Ax - b)|)."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    slack = qp.A @ x - qp.b
    primal = float(max(0.0, np.max(slack, initial=0.0)))
    dual = float(np.max(np.abs(2.0 * qp.q * x + qp.c + qp.A.T @ mu), initial=0.0))
    comp = float(abs(mu @ slack))
    return primal, dual, comp


def solve(qp: QuadraticProgram, feas_tol: float | None = None, opt_tol: float = 1e-8,
          max_iter: int = 100_000, x0=None) -> QpSolution:
    """Solve ``qp`` to the KKT tolerances.

    ``feas_tol`` defaults to ``1e-8 * (1 + max|b|)``. Stationarity is
    accepted at ``opt_tol * (1 + max|c|)`` and complementarity at ``opt_tol``.
    Infeasible problems return status ``INFEASIBLE`` rather than raising.
    """
    if feas_tol is None:
        feas_tol = 1e-8 * (1.0 + float(np.max(np.abs(qp.b), initial=0.0)))
    dual_tol = opt_tol * (1.0 + float(np.max(np.abs(qp.c), initial=0.0)))

    norms = np.linalg.norm(qp.A, axis=1)
    zero = norms == 0.0
    if np.any(zero & (qp.b < -feas_tol)):
        rows = tuple(int(i) for i in np.flatnonzero(zero & (qp.b < -feas_tol)))
        return _infeasible(qp, np.zeros(qp.n_vars), rows, float(-qp.b[list(rows)].min()), 0)
    keep = np.flatnonzero(~zero)

    cost_scale = max(1.0, float(np.max(np.abs(qp.c), initial=0.0)),
                     float(np.max(2.0 * qp.q, initial=0.0)))
    A_s = qp.A[keep] / norms[keep, None]
    b_s = qp.b[keep] / norms[keep]
    p_s = 2.0 * qp.q / cost_scale
    c_s = qp.c / cost_scale

    x, mu_s, iters, converged = _interior_point(p_s, c_s, A_s, b_s, max_iter, x0)
    mu = np.zeros(qp.n_rows)
    if converged:
        mu[keep] = mu_s * cost_scale / norms[keep]
        active = keep[mu_s > b_s - A_s @ x]
        x, mu = _polish(qp, x, mu, active, feas_tol, dual_tol, opt_tol)
        primal, dual, comp = kkt_residuals(qp, x, mu)
        if primal <= feas_tol and dual <= dual_tol and comp <= opt_tol:
            return QpSolution(x, qp.objective(x), QpStatus.OPTIMAL, mu, primal, dual, comp, iters)

    t_min, x_i, rows = _least_infeasible(A_s, b_s, keep, norms, qp.n_vars)
    if t_min > feas_tol:
        logger.debug("QP infeasible: min infeasibility %.3g on rows %s", t_min, rows)
        return _infeasible(qp, x_i, rows, t_min, iters)
    if not converged:
        mu = np.zeros(qp.n_rows)
        mu[keep] = np.maximum(mu_s, 0.0) * cost_scale / norms[keep]
    primal, dual, comp = kkt_residuals(qp, x, mu)
    return QpSolution(x, qp.objective(x), QpStatus.ITERATION_LIMIT, mu, primal, dual, comp, iters)


def _infeasible(qp, x, rows, t_min, iters) -> QpSolution:
    primal, dual, comp = kkt_residuals(qp, x, np.zeros(qp.n_rows))
    return QpSolution(x, qp.objective(x), QpStatus.INFEASIBLE, np.zeros(qp.n_rows),
                      primal, dual, comp, iters, infeasible_rows=tuple(rows),
                      min_infeasibility=float(t_min))


def _interior_point(p, c, A, b, max_iter, x0=None, tol=1e-11):
    """Mehrotra predictor-corrector on ``min 0.5 x'diag(p)x + c'x, Ax <= b``.

    Returns ``(x, mu, iterations, converged)``.
    """
    n = p.size
    m = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if m == 0:
        if np.any((p == 0) & (c != 0)):
            return x, np.zeros(0), 0, False
        safe = np.where(p > 0, p, 1.0)
        return np.where(p > 0, -c / safe, 0.0), np.zeros(0), 0, True

    s = np.maximum(b - A @ x, 1.0)
    mu = np.ones(m)
    reg = 1e-12
    scale_b = 1.0 + float(np.max(np.abs(b)))
    scale_c = 1.0 + float(np.max(np.abs(c)))
    best_merit = np.inf
    since_best = 0
    limit = min(max_iter, 500)
    for it in range(1, limit + 1):
        r_d = p * x + c + A.T @ mu
        r_p = A @ x + s - b
        gap = float(s @ mu) / m
        res_p = float(np.max(np.abs(r_p))) / scale_b
        res_d = float(np.max(np.abs(r_d))) / scale_c
        if res_p <= tol and res_d <= tol and gap <= tol:
            return x, mu, it, True
        merit = max(res_p, res_d, gap)
        if merit < 0.9 * best_merit:
            best_merit, since_best = merit, 0
        else:
            since_best += 1
            if since_best >= 30 or float(np.max(mu)) > 1e12 * scale_c:
                break

        d = mu / s
        H = A.T @ (d[:, None] * A)
        H[np.diag_indices(n)] += p + reg
        try:
            chol = np.linalg.cholesky(H)
            def lin(rhs):
                return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        except np.linalg.LinAlgError:
            def lin(rhs):
                return np.linalg.lstsq(H, rhs, rcond=None)[0]

        def direction(r_c):
            dx = lin(-r_d - A.T @ ((mu * r_p - r_c) / s))
            ds = -r_p - A @ dx
            dmu = (-r_c - mu * ds) / s
            return dx, ds, dmu

        dx_a, ds_a, dmu_a = direction(s * mu)
        a_aff = min(_max_step(s, ds_a), _max_step(mu, dmu_a))
        gap_aff = float((s + a_aff * ds_a) @ (mu + a_aff * dmu_a)) / m
        sigma = (gap_aff / gap) ** 3 if gap > 0 else 0.0
        r_c = s * mu + ds_a * dmu_a - sigma * gap
        dx, ds, dmu = direction(r_c)
        step = min(1.0, 0.995 * min(_max_step(s, ds), _max_step(mu, dmu)))
        x = x + step * dx
        s = np.maximum(s + step * ds, 1e-300)
        mu = np.maximum(mu + step * dmu, 1e-300)
    return x, mu, it, False


def _max_step(v, dv) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _polish(qp, x, mu, active, feas_tol, dual_tol, opt_tol):
    """Re-solve the KKT system with the active rows held as equalities."""
    n = qp.n_vars
    k = active.size
    A_act = qp.A[active]
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = np.diag(2.0 * qp.q)
    kkt[:n, n:] = A_act.T
    kkt[n:, :n] = A_act
    rhs = np.concatenate([-qp.c, qp.b[active]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return x, mu
    if not np.all(np.isfinite(sol)):
        return x, mu
    x_new = sol[:n]
    mu_new = np.zeros_like(mu)
    mu_new[active] = sol[n:]
    if np.any(mu_new < 0):
        return x, mu
    primal, dual, comp = kkt_residuals(qp, x_new, mu_new)
    old = kkt_residuals(qp, x, mu)
    if primal <= feas_tol and dual <= dual_tol and comp <= opt_tol and \
            max(primal, dual, comp) <= max(old):
        return x_new, mu_new
    return x, mu


def _least_infeasible(A_s, b_s, keep, norms, n):
    """Phase I: minimize the largest normalized row violation ``t >= 0``.

    A small proximal term keeps the problem bounded in ``x``. Returns the
    unscaled worst violation at the phase-I point, that point, and the
    rows carrying positive phase-I multipliers.
    """
    m = b_s.size
    A1 = np.zeros((m + 1, n + 1))
    A1[:m, :n] = A_s
    A1[:m, n] = -1.0
    A1[m, n] = -1.0
    b1 = np.concatenate([b_s, [0.0]])
    p1 = np.concatenate([np.full(n, 1e-9), [0.0]])
    c1 = np.zeros(n + 1)
    c1[n] = 1.0
    z, mu1, _, _ = _interior_point(p1, c1, A1, b1, 500)
    x = z[:n]
    viol = A_s @ x - b_s
    worst = float(np.max(viol * norms[keep], initial=0.0))
    rows = tuple(int(keep[i]) for i in np.flatnonzero(mu1[:m] > 1e-6))
    if not rows and worst > 0:
        rows = tuple(int(keep[i]) for i in np.flatnonzero(viol >= np.max(viol) - 1e-9))
    return worst, x, rows
