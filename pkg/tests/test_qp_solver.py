import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jccopf.qp_solver import QpStatus, QuadraticProgram, kkt_residuals, solve


def brute_force_qp(q, c, A, b, tol=1e-9):
    """Minimum of a strictly convex separable QP by enumerating active sets."""
    n, m = len(q), len(b)
    best = None
    for k in range(0, min(n, m) + 1):
        for rows in itertools.combinations(range(m), k):
            rows = list(rows)
            kkt = np.zeros((n + k, n + k))
            kkt[:n, :n] = np.diag(2.0 * q)
            kkt[:n, n:] = A[rows].T
            kkt[n:, :n] = A[rows]
            rhs = np.concatenate([-c, b[rows]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            x, mu = sol[:n], sol[n:]
            if np.all(A @ x <= b + tol * (1 + np.abs(b))) and np.all(mu >= -tol):
                f = float(q @ (x * x) + c @ x)
                if best is None or f < best:
                    best = f
    return best


def test_bound_constrained_scalar():
    qp = QuadraticProgram([1.0], [-4.0], [[1.0]], [1.0], offset=4.0)
    sol = solve(qp)
    assert sol.status is QpStatus.OPTIMAL
    assert sol.x[0] == pytest.approx(1.0, abs=1e-9)
    assert sol.objective == pytest.approx(1.0, abs=1e-9)
    # stationarity convention: 2 q x + c + A' mu = 0 with mu >= 0
    assert sol.multipliers[0] == pytest.approx(2.0, abs=1e-7)


def test_unconstrained_and_inactive():
    sol = solve(QuadraticProgram([1.0, 2.0], [-2.0, 4.0], np.zeros((0, 2)), []))
    np.testing.assert_allclose(sol.x, [1.0, -1.0], atol=1e-9)
    sol = solve(QuadraticProgram([1.0], [-2.0], [[1.0]], [10.0]))
    assert sol.x[0] == pytest.approx(1.0, abs=1e-9) and abs(sol.multipliers[0]) < 1e-9


def test_coupling_row():
    # min x1^2 + x2^2 s.t. x1 + x2 >= 2
    sol = solve(QuadraticProgram([1.0, 1.0], [0.0, 0.0], [[-1.0, -1.0]], [-2.0]))
    np.testing.assert_allclose(sol.x, [1.0, 1.0], atol=1e-9)
    assert sol.objective == pytest.approx(2.0, abs=1e-9)


def test_linear_program():
    sol = solve(QuadraticProgram([0.0, 0.0], [-1.0, -2.0], [[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
                                 [3.0, 0.0, 0.0]))
    np.testing.assert_allclose(sol.x, [0.0, 3.0], atol=1e-8)
    assert sol.objective == pytest.approx(-6.0, abs=1e-8)


def test_infeasible_is_reported_not_raised():
    sol = solve(QuadraticProgram([1.0], [0.0], [[1.0], [-1.0]], [1.0, -2.0]))
    assert sol.status is QpStatus.INFEASIBLE and not sol.optimal
    assert set(sol.infeasible_rows) == {0, 1}
    assert sol.min_infeasibility > 0.1


def test_zero_row_contradiction():
    sol = solve(QuadraticProgram([1.0], [0.0], [[0.0]], [-1.0]))
    assert sol.status is QpStatus.INFEASIBLE and sol.infeasible_rows == (0,)


def random_qp(rng, n, m):
    q = rng.uniform(0.05, 2.0, n)
    c = rng.normal(0, 5, n)
    A = rng.normal(size=(m, n))
    x0 = rng.normal(0, 2, n)
    b = A @ x0 + rng.uniform(0.0, 2.0, m)
    return q, c, A, b


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 8), st.integers(0, 2**32 - 1))
def test_matches_active_set_enumeration(n, m, seed):
    q, c, A, b = random_qp(np.random.default_rng(seed), n, m)
    sol = solve(QuadraticProgram(q, c, A.reshape(m, n), b))
    assert sol.optimal
    ref = brute_force_qp(q, c, A.reshape(m, n), b)
    assert sol.objective == pytest.approx(ref, rel=1e-7, abs=1e-7)
    primal, dual, comp = kkt_residuals(QuadraticProgram(q, c, A.reshape(m, n), b),
                                       sol.x, sol.multipliers)
    assert primal <= 1e-7 and dual <= 1e-6 and comp <= 1e-6
    assert np.all(sol.multipliers >= -1e-9)


def test_degenerate_duplicate_rows():
    A = np.array([[1.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    sol = solve(QuadraticProgram([1.0, 1.0], [-10.0, 0.0], A, [1.0, 1.0, 2.0]))
    assert sol.optimal and sol.x[0] == pytest.approx(1.0, abs=1e-8)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        QuadraticProgram([-1.0], [0.0], [[1.0]], [1.0])
    with pytest.raises(ValueError):
        QuadraticProgram([1.0], [0.0, 1.0], [[1.0]], [1.0])
    with pytest.raises(ValueError):
        QuadraticProgram([1.0], [np.nan], [[1.0]], [1.0])
