import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqtube.errors import NotPositiveDefinite
from uqtube.lp import feasible_point
from uqtube.mpc import build_opt, solve_opt
from uqtube.qp import KKT_TOL, QpStatus, QuadraticProgram, kkt_residuals, solve_qp
from uqtube.qtube import conservative_tube


def random_qp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 8))
    m = int(rng.integers(0, 12))
    me = int(rng.integers(0, 3)) if n > 2 else 0
    L = rng.standard_normal((n, n))
    H = L @ L.T + 0.1 * np.eye(n)
    return QuadraticProgram(H, rng.standard_normal(n), rng.standard_normal((m, n)), rng.random(m),
                            rng.standard_normal((me, n)), 0.1 * rng.standard_normal(me))


def test_scalar_lower_bound():
    res = solve_qp(QuadraticProgram([[2.0]], None, [[-1.0]], [-1.0]))
    assert res.status is QpStatus.OPTIMAL
    assert res.x[0] == pytest.approx(1.0)
    assert res.value == pytest.approx(1.0)
    assert res.active == [0]


def test_unconstrained_norm():
    res = solve_qp(QuadraticProgram(2 * np.eye(3)))
    assert res.value == pytest.approx(0.0)
    np.testing.assert_allclose(res.x, 0.0, atol=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
@settings(max_examples=40, deadline=None)
def test_inactive_constraints_match_closed_form(g):
    H = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]])
    g = np.array(g)
    x_free = -np.linalg.solve(H, g)
    qp = QuadraticProgram(H, g, np.vstack([np.eye(3), -np.eye(3)]),
                          np.concatenate([np.abs(x_free) + 1, np.abs(x_free) + 1]))
    np.testing.assert_allclose(solve_qp(qp).x, x_free, atol=1e-9)


def test_infeasible_certified_by_phase_one():
    qp = QuadraticProgram(np.eye(1), None, [[1.0], [-1.0]], [-1.0, -1.0])
    assert solve_qp(qp).status is QpStatus.INFEASIBLE


def test_zero_curvature_ray_until_blocked():
    # a^2 - b with b <= 1: the flat direction b is followed to the bound
    qp = QuadraticProgram(np.diag([2.0, 0.0]), [0.0, -1.0], [[0.0, 1.0]], [1.0])
    res = solve_qp(qp)
    np.testing.assert_allclose(res.x, [0.0, 1.0], atol=1e-12)


def test_unbounded_flat_direction_raises():
    qp = QuadraticProgram(np.diag([2.0, 0.0]), [0.0, -1.0])
    with pytest.raises(NotPositiveDefinite):
        solve_qp(qp)


def test_indefinite_hessian_rejected():
    with pytest.raises(NotPositiveDefinite):
        solve_qp(QuadraticProgram(np.diag([1.0, -1.0])))


def test_nonsymmetric_hessian_rejected():
    with pytest.raises(NotPositiveDefinite):
        QuadraticProgram([[1.0, 1.0], [0.0, 1.0]])


@pytest.mark.parametrize("seed", range(100))
def test_random_qp_kkt(seed):
    qp = random_qp(seed)
    res = solve_qp(qp)
    if not res.optimal:
        assert feasible_point(qp.A_ub, qp.b_ub, qp.A_eq, qp.b_eq, n=qp.n) is None
        return
    stat, prim, dual, comp = kkt_residuals(qp, res)
    assert stat <= KKT_TOL and prim <= KKT_TOL and dual <= KKT_TOL and comp <= KKT_TOL


@pytest.mark.parametrize("seed", range(100))
def test_random_qp_against_oracle(seed):
    cp = pytest.importorskip("cvxpy")
    qp = random_qp(seed)
    res = solve_qp(qp)
    z = cp.Variable(qp.n)
    cons = []
    if qp.A_ub.shape[0]:
        cons.append(qp.A_ub @ z <= qp.b_ub)
    if qp.A_eq.shape[0]:
        cons.append(qp.A_eq @ z == qp.b_eq)
    prob = cp.Problem(cp.Minimize(0.5 * cp.quad_form(z, qp.H) + qp.g @ z), cons)
    prob.solve()
    if prob.status == "infeasible":
        assert res.status is QpStatus.INFEASIBLE
    else:
        assert res.value == pytest.approx(prob.value, abs=1e-6)


def _slice_feasible(qp, s0, c):
    nx, nc = s0.size, c.size
    fix = np.zeros((nx + nc, qp.n))
    fix[:, :nx + nc] = np.eye(nx + nc)
    return feasible_point(qp.A_ub, qp.b_ub, np.vstack([qp.A_eq, fix]),
                          np.concatenate([qp.b_eq, s0, c]), n=qp.n) is not None


def test_case_study_grid_search(ta):
    x = np.array([-4.0, 1.5])
    tube = conservative_tube(ta)
    sol = solve_opt(ta, tube, x)
    qp = build_opt(ta, tube, x).qp
    P_x, P_c = ta.gs.P_x, ta.gs.P_c
    cost_c = sol.c @ P_c @ sol.c

    # zooming grid over s0 with c fixed at the optimum
    centre, half, best = sol.s0.copy(), 0.5, np.inf
    for _ in range(9):
        pts = np.linspace(-half, half, 9)
        for dx in pts:
            for dy in pts:
                s0 = centre + np.array([dx, dy])
                val = s0 @ P_x @ s0 + cost_c
                if val < best and _slice_feasible(qp, s0, sol.c):
                    best, arg = val, s0
        centre, half = arg, half / 4
    assert sol.value == pytest.approx(best, abs=1e-4)
    assert best >= sol.value - 1e-9
