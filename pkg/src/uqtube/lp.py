"""Dense two-phase simplex for small linear programs.

The solver works on a full tableau. Entering columns follow Dantzig's rule
until a degenerate pivot is seen, after which the phase switches to Bland's
smallest-index rule, so cycling cannot occur and the pivot sequence is a
deterministic function of the input.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, IterationLimit

FEAS_TOL = 1e-8
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LinearProgram:
    """maximise ``c @ z`` s.t. ``A_ub z <= b_ub``, ``A_eq z == b_eq``, ``lb <= z <= ub``.

    Bounds default to free variables (``-inf``/``+inf``).
    """
    c: np.ndarray
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "A_ub")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "A_eq")
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(-1)
        if self.lb.size != n or self.ub.size != n:
            raise DimensionMismatch("bounds must match the number of variables")

    @property
    def n(self):
        return self.c.size


def _rows(a, b, n, name):
    if a is None:
        return np.zeros((0, n)), np.zeros(0)
    a = np.asarray(a, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape[0] != b.size:
        raise DimensionMismatch(f"{name} rows and rhs length differ")
    return a, b


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray = None
    value: float = float("nan")
    pivots: list = field(default_factory=list)

    @property
    def optimal(self):
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    def __init__(self, rows, rhs, basis, n_art_start):
        m, ncol = rows.shape
        self.t = np.zeros((m + 1, ncol + 1))
        self.t[:m, :ncol] = rows
        self.t[:m, -1] = rhs
        self.basis = list(basis)
        self.art_start = n_art_start
        self.pivots = []
        self.limit = 10 * (m + ncol) ** 2

    @property
    def m(self):
        return self.t.shape[0] - 1

    def set_cost(self, cost):
        t = self.t
        t[-1, :-1] = cost
        t[-1, -1] = 0.0
        for r, j in enumerate(self.basis):
            if cost[j] != 0.0:
                t[-1] -= cost[j] * t[r]

    def pivot(self, r, j):
        t = self.t
        t[r] /= t[r, j]
        col = t[:, j].copy()
        col[r] = 0.0
        t -= np.outer(col, t[r])
        t[:, j] = 0.0
        t[r, j] = 1.0
        self.basis[r] = j
        self.pivots.append((r, j))
        if len(self.pivots) > self.limit:
            raise IterationLimit("simplex pivot limit exceeded")

    def run(self, ncols):
        """Minimise the current cost row over the first ``ncols`` columns."""
        t = self.t
        bland = False
        while True:
            d = t[-1, :ncols]
            neg = np.flatnonzero(d < -OPT_TOL)
            if neg.size == 0:
                return True
            j = int(neg[0]) if bland else int(neg[np.argmin(d[neg])])
            col = t[:-1, j]
            cand = np.flatnonzero(col > PIVOT_TOL)
            if cand.size == 0:
                return False
            ratios = t[cand, -1] / col[cand]
            best = ratios.min()
            tied = cand[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = min(tied, key=lambda i: self.basis[i])
            if best <= 1e-12:
                bland = True
            self.pivot(int(r), j)
            np.maximum(t[:-1, -1], 0.0, out=t[:-1, -1], where=t[:-1, -1] > -1e-12)


def solve_lp(lp):
    """Solve a :class:`LinearProgram` by the two-phase simplex method."""
    n = lp.n
    # z = z0 + T y with y >= 0
    cols, z0 = [], np.zeros(n)
    bound_rows, bound_rhs = [], []
    for i in range(n):
        lo, hi = lp.lb[i], lp.ub[i]
        if np.isfinite(lo):
            z0[i] = lo
            cols.append((i, 1.0))
            if np.isfinite(hi):
                if hi < lo - FEAS_TOL:
                    return LpResult(LpStatus.INFEASIBLE)
                bound_rows.append(len(cols) - 1)
                bound_rhs.append(hi - lo)
        elif np.isfinite(hi):
            z0[i] = hi
            cols.append((i, -1.0))
        else:
            cols.append((i, 1.0))
            cols.append((i, -1.0))
    ny = len(cols)
    T = np.zeros((n, ny))
    for k, (i, s) in enumerate(cols):
        T[i, k] = s

    a_ub = lp.A_ub @ T
    b_ub = lp.b_ub - lp.A_ub @ z0
    if bound_rows:
        extra = np.zeros((len(bound_rows), ny))
        extra[np.arange(len(bound_rows)), bound_rows] = 1.0
        a_ub = np.vstack([a_ub, extra])
        b_ub = np.concatenate([b_ub, bound_rhs])
    a_eq = lp.A_eq @ T
    b_eq = lp.b_eq - lp.A_eq @ z0
    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    m = m_ub + m_eq

    rows = np.zeros((m, ny + m_ub))
    rows[:m_ub, :ny] = a_ub
    rows[:m_ub, ny:] = np.eye(m_ub)
    rows[m_ub:, :ny] = a_eq
    rhs = np.concatenate([b_ub, b_eq])
    flip = rhs < 0
    rows[flip] *= -1.0
    rhs[flip] *= -1.0

    need_art = [r for r in range(m) if r >= m_ub or flip[r]]
    n_main = ny + m_ub
    art = np.zeros((m, len(need_art)))
    basis = [ny + r if r < m_ub else -1 for r in range(m)]
    for k, r in enumerate(need_art):
        art[r, k] = 1.0
        basis[r] = n_main + k
    tab = _Tableau(np.hstack([rows, art]), rhs, basis, n_main)

    if need_art:
        cost = np.zeros(n_main + len(need_art))
        cost[n_main:] = 1.0
        tab.set_cost(cost)
        tab.run(n_main + len(need_art))
        if -tab.t[-1, -1] > FEAS_TOL * (1.0 + np.abs(rhs).max()):
            return LpResult(LpStatus.INFEASIBLE, pivots=tab.pivots)
        _drive_out_artificials(tab)
        tab.t = np.delete(tab.t, np.s_[n_main:-1], axis=1)

    cost = np.zeros(n_main)
    cost[:ny] = -(T.T @ lp.c)
    tab.set_cost(cost)
    if not tab.run(n_main):
        return LpResult(LpStatus.UNBOUNDED, pivots=tab.pivots)

    y = np.zeros(n_main)
    for r, j in enumerate(tab.basis):
        y[j] = tab.t[r, -1]
    x = z0 + T @ y[:ny]
    return LpResult(LpStatus.OPTIMAL, x, float(lp.c @ x), tab.pivots)


def _drive_out_artificials(tab):
    r = 0
    while r < tab.m:
        j = tab.basis[r]
        if j < tab.art_start:
            r += 1
            continue
        row = tab.t[r, :tab.art_start]
        nz = np.flatnonzero(np.abs(row) > 1e-9)
        if nz.size:
            tab.pivot(r, int(nz[0]))
            r += 1
        else:
            # redundant equality row
            tab.t = np.delete(tab.t, r, axis=0)
            del tab.basis[r]


def maximize(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None):
    """Convenience wrapper building and solving a :class:`LinearProgram`."""
    return solve_lp(LinearProgram(c, A_ub, b_ub, A_eq, b_eq, lb, ub))


def feasible_point(A_ub=None, b_ub=None, A_eq=None, b_eq=None, n=None, lb=None, ub=None):
    """A vertex of the constraint polyhedron, or ``None`` when it is empty."""
    if n is None:
        n = (A_ub if A_ub is not None else A_eq).shape[1]
    res = solve_lp(LinearProgram(np.zeros(n), A_ub, b_ub, A_eq, b_eq, lb, ub))
    return res.x if res.optimal else None
