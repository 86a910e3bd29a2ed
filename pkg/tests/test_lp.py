import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqtube.errors import DimensionMismatch
from uqtube.lp import FEAS_TOL, LinearProgram, LpStatus, feasible_point, maximize, solve_lp
from uqtube.poly import support

scipy_optimize = pytest.importorskip("scipy.optimize")


def random_lp(rng, k):
    n = int(rng.integers(1, 8))
    m = int(rng.integers(1, 15))
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m) + (k % 2)
    c = rng.standard_normal(n)
    lb = np.where(rng.random(n) < 0.5, -np.inf, -3 * rng.random(n))
    ub = np.where(rng.random(n) < 0.5, np.inf, 3 * rng.random(n))
    me = int(rng.integers(0, 2))
    A_eq = rng.standard_normal((me, n)) if me else None
    b_eq = rng.standard_normal(me) if me else None
    return LinearProgram(c, A, b, A_eq, b_eq, lb, ub)


def kkt_stationarity(lp, x, tol=1e-7):
    """Smallest residual of ``c = sum lam_i a_i + A_eq' mu`` over active rows with ``lam >= 0``."""
    rows = [a for a, b in zip(lp.A_ub, lp.b_ub) if a @ x >= b - tol]
    for i in range(lp.n):
        e = np.zeros(lp.n)
        e[i] = 1.0
        if x[i] >= lp.ub[i] - tol:
            rows.append(e)
        if x[i] <= lp.lb[i] + tol:
            rows.append(-e)
    cols = rows + list(lp.A_eq) + [-a for a in lp.A_eq]
    if not cols:
        return float(np.abs(lp.c).max())
    _, resid = scipy_optimize.nnls(np.array(cols).T, lp.c)
    return resid


def test_trivial_optimal():
    res = maximize([1.0], [[1.0], [-1.0]], [1.0, 0.0])
    assert res.status is LpStatus.OPTIMAL
    assert res.value == pytest.approx(1.0)


def test_trivial_infeasible():
    res = maximize([1.0], [[1.0], [-1.0]], [-1.0, -2.0])
    assert res.status is LpStatus.INFEASIBLE


def test_unbounded():
    assert maximize([1.0, 1.0], [[1.0, -1.0]], [1.0]).status is LpStatus.UNBOUNDED


def test_support_of_case_study_box(W):
    assert support(W, [1.0, 0.0]) == pytest.approx(0.5)


def test_bounds_and_equalities():
    res = maximize([1.0, 2.0], A_eq=[[1.0, 1.0]], b_eq=[3.0], lb=[0.0, -1.0], ub=[np.inf, 2.0])
    np.testing.assert_allclose(res.x, [1.0, 2.0])


def test_redundant_equalities():
    res = maximize([1.0, 1.0], A_eq=[[1.0, -1.0], [2.0, -2.0]], b_eq=[0.0, 0.0], ub=[1.0, 5.0])
    assert res.optimal
    np.testing.assert_allclose(res.x, [1.0, 1.0])


def test_degenerate_cycling_example():
    # Beale's classic cycling instance (maximisation form)
    c = [0.75, -150.0, 0.02, -6.0]
    A = [[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]]
    b = [0.0, 0.0, 1.0]
    res = maximize(c, A, b, lb=np.zeros(4))
    assert res.optimal
    assert res.value == pytest.approx(0.05)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        LinearProgram([1.0, 2.0], [[1.0, 0.0]], [1.0, 2.0])


def test_feasible_point():
    x = feasible_point(np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]), [1.0, 0.0, 0.0])
    assert x is not None and x.sum() <= 1 + 1e-9 and x.min() >= -1e-9
    assert feasible_point(np.array([[1.0], [-1.0]]), [-1.0, -1.0]) is None


@pytest.mark.parametrize("seed", range(100))
def test_random_lp_against_oracle(seed):
    rng = np.random.default_rng(seed)
    lp = random_lp(rng, seed)
    res = solve_lp(lp)
    kw = dict(A_ub=lp.A_ub, b_ub=lp.b_ub, A_eq=lp.A_eq if lp.A_eq.size else None,
              b_eq=lp.b_eq if lp.b_eq.size else None, bounds=list(zip(lp.lb, lp.ub)))
    ref = scipy_optimize.linprog(-lp.c, **kw)
    expected = {0: LpStatus.OPTIMAL, 2: LpStatus.INFEASIBLE, 3: LpStatus.UNBOUNDED}[ref.status]
    if expected is LpStatus.INFEASIBLE and scipy_optimize.linprog(np.zeros(lp.n), **kw).status == 0:
        # HiGHS can report "infeasible" for a feasible but unbounded model
        expected = LpStatus.UNBOUNDED
    assert res.status is expected
    if res.optimal:
        assert res.value == pytest.approx(-ref.fun, abs=1e-7)
        x = res.x
        assert np.all(lp.A_ub @ x <= lp.b_ub + FEAS_TOL)
        assert np.all(np.abs(lp.A_eq @ x - lp.b_eq) <= FEAS_TOL)
        assert np.all(x >= lp.lb - FEAS_TOL) and np.all(x <= lp.ub + FEAS_TOL)
        assert kkt_stationarity(lp, x) <= 1e-7


@pytest.mark.parametrize("seed", range(50))
def test_weak_duality(seed):
    # max c'x s.t. Ax <= b, x >= 0 with a dual-feasible y >= 0, A'y >= c built by hand
    rng = np.random.default_rng(1000 + seed)
    m, n = 5, 4
    A = rng.random((m, n)) + 0.1
    b = rng.random(m) + 0.5
    y = rng.random(m)
    c = A.T @ y - rng.random(n)
    res = maximize(c, A, b, lb=np.zeros(n))
    assert res.optimal
    assert res.value <= b @ y + 1e-9


def test_deterministic_pivots():
    rng = np.random.default_rng(7)
    lp = random_lp(rng, 1)
    first = solve_lp(lp)
    second = solve_lp(LinearProgram(lp.c.copy(), lp.A_ub.copy(), lp.b_ub.copy(),
                                    lp.A_eq.copy(), lp.b_eq.copy(), lp.lb.copy(), lp.ub.copy()))
    assert first.pivots == second.pivots
    assert first.status is second.status


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2),
       st.lists(st.floats(0.1, 5), min_size=2, max_size=2))
@settings(max_examples=50, deadline=None)
def test_box_maximum_is_corner(c, width):
    res = maximize(c, lb=[-w for w in width], ub=width)
    # reduced costs below the optimality tolerance may stop the walk one edge early
    assert res.value == pytest.approx(sum(abs(ci) * w for ci, w in zip(c, width)), abs=1e-7)
