from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog

from bncg.lp import LinearProgram, LpBuilder, LpCyclingError, LpSizeError, LpStatus, solve_lp
from oracles import random_tiny_lp, vertex_enumeration


def lp(c, A, rel, b, free=None, maximize=False):
    c = np.asarray(c, dtype=float)
    return LinearProgram(c, np.asarray(A, dtype=float), tuple(rel), np.asarray(b, dtype=float), free, maximize)


def test_single_lower_bound():
    sol = solve_lp(lp([1], [[1]], [">="], [3]))
    assert sol.status is LpStatus.OPTIMAL
    assert sol.x[0] == pytest.approx(3)
    assert sol.duals[0] == pytest.approx(1)
    assert sol.objective == pytest.approx(3)


def test_unbounded_with_ray():
    sol = solve_lp(lp([1], [[1]], [">="], [0], maximize=True))
    assert sol.status is LpStatus.UNBOUNDED
    assert sol.ray[0] > 0


def test_infeasible():
    sol = solve_lp(lp([1, 1], [[1, 1], [1, 1]], ["<=", ">="], [1, 2]))
    assert sol.status is LpStatus.INFEASIBLE


def test_free_variables():
    # min x subject to x >= -4 with x free
    sol = solve_lp(lp([1], [[1]], [">="], [-4], free=[True]))
    assert sol.x[0] == pytest.approx(-4)
    assert sol.duals[0] == pytest.approx(1)


def test_dual_sign_convention():
    # min 2x + 3y, x + y >= 4 (binding), x <= 10, y == 1
    sol = solve_lp(lp([2, 3], [[1, 1], [1, 0], [0, 1]], [">=", "<=", "=="], [4, 10, 1]))
    assert sol.x == pytest.approx([3, 1])
    assert sol.duals == pytest.approx([2, 0, 1])
    assert sol.objective == pytest.approx(np.dot([4, 10, 1], sol.duals))
    # maximization flips the inequality signs
    sol = solve_lp(lp([1, 1], [[1, 0], [0, 1]], ["<=", "<="], [2, 5], maximize=True))
    assert sol.duals == pytest.approx([1, 1])


def test_builder():
    b = LpBuilder()
    x = b.add_var(1.0)
    y = b.add_var(1.0, free=True)
    b.add_row({x: 1, y: 1}, ">=", 2)
    b.add_row([(y, 1.0), (y, 1.0)], "<=", 1)  # repeated entries accumulate
    sol = solve_lp(b.build())
    assert sol.objective == pytest.approx(2)
    assert b.build().A[1, y] == 2


def test_validation():
    with pytest.raises(ValueError, match="row count"):
        lp([1], [[1]], ["<=", "<="], [1])
    with pytest.raises(ValueError, match="unknown relations"):
        lp([1], [[1]], ["<"], [1])
    with pytest.raises(ValueError, match="finite"):
        lp([1], [[np.inf]], ["<="], [1])


def test_size_cap():
    with pytest.raises(LpSizeError):
        solve_lp(lp(np.ones(10), np.ones((5, 10)), ["<="] * 5, np.ones(5)), max_nonzeros=49)


def test_iteration_cap_reports_cycling():
    rng = np.random.default_rng(0)
    prog = random_tiny_lp(rng, m=4, nv=4)
    with pytest.raises(LpCyclingError, match="numerical cycling"):
        solve_lp(prog, max_iters=0)


def test_deterministic():
    prog = random_tiny_lp(np.random.default_rng(5), m=4, nv=4)
    a, b = solve_lp(prog), solve_lp(prog)
    assert a.status == b.status
    if a.status is LpStatus.OPTIMAL:
        assert np.array_equal(a.x, b.x) and np.array_equal(a.duals, b.duals)


def test_degenerate_klee_minty_style():
    # highly degenerate: many constraints tight at the origin
    n = 6
    A = np.vstack([np.eye(n), -np.eye(n), np.ones((1, n)), np.tril(np.ones((n, n)))])
    b = np.concatenate([np.ones(n), np.zeros(n), [3.0], np.ones(n) * 2])
    rel = ["<="] * len(b)
    c = -np.arange(1, n + 1, dtype=float)
    sol = solve_lp(lp(c, A, rel, b))
    ref = linprog(c, A_ub=A, b_ub=b, bounds=(0, None), method="highs")
    assert sol.objective == pytest.approx(ref.fun, abs=1e-9)


@pytest.mark.parametrize("seed", range(40))
def test_random_against_vertex_enumeration(seed):
    rng = np.random.default_rng(1000 + seed)
    prog = random_tiny_lp(rng)
    sol = solve_lp(prog)
    ref = vertex_enumeration(prog)
    if ref is None:
        assert sol.status is LpStatus.INFEASIBLE
        return
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(ref, abs=1e-8)
    assert prog.residuals(sol.x).max(initial=0.0) <= 1e-9
    assert np.all(sol.x[~prog.free] >= -1e-12)


def _check_certificates(prog, sol, tol=1e-7):
    rel = np.array(prog.relations)
    if sol.status is LpStatus.OPTIMAL:
        y = sol.duals
        sense = -1.0 if prog.maximize else 1.0
        # sign convention: d objective / d rhs
        assert np.all(sense * y[rel == ">="] >= -tol)
        assert np.all(sense * y[rel == "<="] <= tol)
        reduced = prog.c - prog.A.T @ y
        assert np.all(np.abs(reduced[prog.free]) <= tol)
        assert np.all(sense * reduced[~prog.free] >= -tol)
        # complementary slackness
        slack = prog.A @ sol.x - prog.b
        assert np.all(np.abs(y * slack) <= tol)
        assert np.all(np.abs(reduced[~prog.free] * sol.x[~prog.free]) <= tol)
        assert abs(prog.b @ y - sol.objective) <= tol * (1 + abs(sol.objective))
    elif sol.status is LpStatus.INFEASIBLE:
        y = sol.ray
        assert np.all(y[rel == ">="] >= -tol) and np.all(y[rel == "<="] <= tol)
        at = prog.A.T @ y
        assert np.all(np.abs(at[prog.free]) <= tol) and np.all(at[~prog.free] <= tol)
        assert prog.b @ y > tol
    else:
        r = sol.ray
        assert (prog.c @ r > tol) if prog.maximize else (prog.c @ r < -tol)
        ar = prog.A @ r
        assert np.all(ar[rel == "<="] <= tol) and np.all(ar[rel == ">="] >= -tol) and np.all(np.abs(ar[rel == "=="]) <= tol)
        assert np.all(r[~prog.free] >= -tol)


def _highs(prog, c):
    rel = np.array(prog.relations)
    ineq = rel != "=="
    return linprog(
        c,
        A_ub=np.vstack([prog.A[rel == "<="], -prog.A[rel == ">="]]) if ineq.any() else None,
        b_ub=np.concatenate([prog.b[rel == "<="], -prog.b[rel == ">="]]) if ineq.any() else None,
        A_eq=prog.A[~ineq] if (~ineq).any() else None,
        b_eq=prog.b[~ineq] if (~ineq).any() else None,
        bounds=[(None, None) if f else (0, None) for f in prog.free],
        method="highs",
    )


@pytest.mark.parametrize("seed", range(300))
def test_random_against_highs(seed):
    rng = np.random.default_rng(seed)
    m, nv = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    prog = random_tiny_lp(rng, m=m, nv=nv, box=float(rng.choice([5.0, 1e3])))
    if rng.random() < 0.2:
        # drop the box rows so unboundedness is possible
        k = m
        prog = LinearProgram(prog.c, prog.A[:k], prog.relations[:k], prog.b[:k], prog.free, prog.maximize)
    sol = solve_lp(prog)
    sign = -1.0 if prog.maximize else 1.0
    ref = _highs(prog, sign * prog.c)
    expected = {0: LpStatus.OPTIMAL, 2: LpStatus.INFEASIBLE, 3: LpStatus.UNBOUNDED}[ref.status]
    if ref.status == 2 and _highs(prog, np.zeros_like(prog.c)).status == 0:
        # HiGHS presolve folds "infeasible or unbounded" into status 2
        expected = LpStatus.UNBOUNDED
    assert sol.status is expected
    if expected is LpStatus.OPTIMAL:
        assert sol.objective == pytest.approx(sign * ref.fun, rel=1e-9, abs=1e-8)
    _check_certificates(prog, sol)
