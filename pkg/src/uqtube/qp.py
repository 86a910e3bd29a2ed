"""Primal active-set solver for small convex quadratic programs.

minimise ``0.5 z'Hz + g'z`` s.t. ``A_ub z <= b_ub`` and ``A_eq z == b_eq``.

``H`` may be singular along variables that carry no cost (the lifted tube
variables of the MPC problem). Equality-constrained subproblems are solved on
the null space of the working constraints; along a zero-curvature descent
direction the iterate moves until a constraint blocks.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, IterationLimit, NotPositiveDefinite
from .lp import feasible_point

KKT_TOL = 1e-7
STEP_TOL = 1e-11
MULT_TOL = 1e-10


class QpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


@dataclass
class QuadraticProgram:
    H: np.ndarray
    g: np.ndarray = None
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = self.H.shape[0]
        if self.H.shape != (n, n):
            raise DimensionMismatch("H must be square")
        if np.abs(self.H - self.H.T).max() > 1e-10 * max(1.0, np.abs(self.H).max()):
            raise NotPositiveDefinite("H is not symmetric")
        self.g = np.zeros(n) if self.g is None else np.asarray(self.g, dtype=float).reshape(-1)
        if self.A_ub is None:
            self.A_ub, self.b_ub = np.zeros((0, n)), np.zeros(0)
        if self.A_eq is None:
            self.A_eq, self.b_eq = np.zeros((0, n)), np.zeros(0)
        self.A_ub = np.asarray(self.A_ub, dtype=float).reshape(-1, n)
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        if self.A_ub.shape[0] != self.b_ub.size or self.A_eq.shape[0] != self.b_eq.size:
            raise DimensionMismatch("constraint rows and rhs lengths differ")

    @property
    def n(self):
        return self.H.shape[0]

    def objective(self, z):
        return float(0.5 * z @ self.H @ z + self.g @ z)


@dataclass
class QpResult:
    status: QpStatus
    x: np.ndarray = None
    value: float = float("nan")
    active: list = field(default_factory=list)
    lam_ub: np.ndarray = None
    mu_eq: np.ndarray = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status is QpStatus.OPTIMAL


def kkt_residuals(qp, res):
    """``(stationarity, primal infeasibility, dual infeasibility, complementarity)``."""
    z = res.x
    stat = qp.H @ z + qp.g + qp.A_ub.T @ res.lam_ub + qp.A_eq.T @ res.mu_eq
    prim = max(np.max(qp.A_ub @ z - qp.b_ub, initial=0.0),
               np.max(np.abs(qp.A_eq @ z - qp.b_eq), initial=0.0))
    dual = max(-np.min(res.lam_ub, initial=0.0), 0.0)
    comp = np.max(np.abs(res.lam_ub * (qp.A_ub @ z - qp.b_ub)), initial=0.0)
    return float(np.abs(stat).max(initial=0.0)), float(prim), float(dual), float(comp)


def _check_psd(H):
    w = np.linalg.eigvalsh(H)
    if w.min() < -1e-10 * max(1.0, np.abs(w).max()):
        raise NotPositiveDefinite(f"H has eigenvalue {w.min():.3e}")


def _eqp_step(H, grad, A_w):
    """Step for the equality-constrained subproblem on the null space of ``A_w``.

    Returns ``(p, ray)``. When the reduced objective has a descent direction of
    (numerically) zero curvature, ``p`` is that direction and ``ray`` is True, so
    the caller moves along it until a constraint blocks. Otherwise ``p`` is the
    least-norm Newton step.
    """
    n = H.shape[0]
    if A_w.shape[0]:
        _, sv, Vt = np.linalg.svd(A_w)
        rank = int(np.sum(sv > 1e-10 * sv[0]))
        Z = Vt[rank:].T
    else:
        Z = np.eye(n)
    if Z.shape[1] == 0:
        return np.zeros(n), False
    ev, Qm = np.linalg.eigh(Z.T @ H @ Z)
    gr = Qm.T @ (Z.T @ grad)
    keep = ev > 1e-12 * max(1.0, ev.max(initial=0.0))
    flat = ~keep & (np.abs(gr) > 1e-12 * (1.0 + np.abs(grad).max()))
    pz = np.zeros_like(gr)
    if np.any(flat):
        pz[flat] = -gr[flat]
        return Z @ (Qm @ pz), True
    pz[keep] = -gr[keep] / ev[keep]
    return Z @ (Qm @ pz), False


def solve_qp(qp, max_iter=None):
    _check_psd(qp.H)
    n = qp.n
    z = feasible_point(qp.A_ub, qp.b_ub, qp.A_eq, qp.b_eq, n=n)
    if z is None:
        return QpResult(QpStatus.INFEASIBLE)
    m_eq = qp.A_eq.shape[0]
    working = []
    max_iter = max_iter or 50 * (n + qp.A_ub.shape[0] + 1)
    for it in range(max_iter):
        grad = qp.H @ z + qp.g
        A_w = np.vstack([qp.A_eq, qp.A_ub[working]])
        p, ray = _eqp_step(qp.H, grad, A_w)
        if not ray and np.abs(p).max() <= STEP_TOL * (1.0 + np.abs(z).max()):
            if A_w.shape[0]:
                mult = np.linalg.lstsq(A_w.T, -grad, rcond=None)[0]
            else:
                mult = np.zeros(0)
            lam_w = mult[m_eq:]
            if lam_w.size == 0 or lam_w.min() >= -MULT_TOL:
                lam = np.zeros(qp.A_ub.shape[0])
                lam[working] = np.maximum(lam_w, 0.0)
                return QpResult(QpStatus.OPTIMAL, z, qp.objective(z), sorted(working),
                                lam, mult[:m_eq], it + 1)
            working.pop(int(np.argmin(lam_w)))
            continue
        step, block = (np.inf if ray else 1.0), None
        Ap = qp.A_ub @ p
        slack = qp.b_ub - qp.A_ub @ z
        row_norm = np.linalg.norm(qp.A_ub, axis=1)
        for i in np.flatnonzero(Ap > 1e-9 * row_norm * np.linalg.norm(p)):
            if i in working:
                continue
            ratio = max(slack[i], 0.0) / Ap[i]
            if ratio < step:
                step, block = ratio, int(i)
        if block is None and ray:
            raise NotPositiveDefinite("objective decreases along a zero-curvature direction")
        z = z + step * p
        if block is not None:
            working.append(block)
    raise IterationLimit("active-set iteration limit exceeded")
