"""Tube MPC problems, feasible-region membership and the online controller."""
import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import BackupInfeasible, BackupUnavailable
from .lp import LinearProgram, solve_lp
from .poly import QuantifiedSet
from .qp import QuadraticProgram, QpStatus, solve_qp
from .qtube import QuantifiedTube, conservative_tube, quantified_tube
from .uq import DisturbanceLog, quantify_batch, quantify_recursive

log = logging.getLogger(__name__)


@dataclass
class MpcProblem:
    """QP over ``z = [s0; c; w_0; ...; w_{r-1}]``.

    ``x - s0 = alpha/(1-rho) * sum_i Phi^i w_i + t`` with ``V w_i <= 1`` encodes
    ``x - s0`` in the tube cross-section without forming the Minkowski sum.
    The ``w`` block is dropped when ``alpha == 0``.
    """
    qp: QuadraticProgram
    nx: int
    n_c: int
    tube: QuantifiedTube
    x: np.ndarray

    @property
    def n_lifted(self):
        return self.nx + self.n_c


def build_opt(ta, qt, x):
    gs, tube = ta.gs, ta.tube
    nx, nc = gs.nx, gs.N * gs.nu
    d = nx + nc
    x = np.asarray(x, dtype=float).reshape(-1)
    use_w = qt.alpha > 0.0
    nw = tube.r * nx if use_w else 0
    n = d + nw

    H = np.zeros((n, n))
    H[:nx, :nx] = 2.0 * gs.P_x
    H[nx:d, nx:d] = 2.0 * gs.P_c

    rows = ta.stack(qt.nu)
    A_ub = np.zeros((rows.shape[0], n))
    A_ub[:, :d] = rows
    b_ub = np.tile(1.0 - qt.h_star, qt.nu + 1)

    A_eq = np.zeros((nx, n))
    A_eq[:, :nx] = np.eye(nx)
    if use_w:
        V = tube.W.V
        box = np.zeros((tube.r * V.shape[0], n))
        for i, Pi in enumerate(tube.generators):
            A_eq[:, d + i * nx:d + (i + 1) * nx] = qt.alpha * tube.scale * Pi
            box[i * V.shape[0]:(i + 1) * V.shape[0], d + i * nx:d + (i + 1) * nx] = V
        A_ub = np.vstack([A_ub, box])
        b_ub = np.concatenate([b_ub, np.tile(tube.W.b, tube.r)])
    b_eq = x - qt.t
    return MpcProblem(QuadraticProgram(H, None, A_ub, b_ub, A_eq, b_eq), nx, nc, qt, x)


def region_member(ta, qt, x):
    """Whether ``x`` lies in the feasible region of ``OPT(tube, h, nu)``."""
    qp = build_opt(ta, qt, x).qp
    res = solve_lp(LinearProgram(np.zeros(qp.n), qp.A_ub, qp.b_ub, qp.A_eq, qp.b_eq))
    return res.optimal


def region_bounding_box(ta, qt):
    """Coordinate-wise extent of the feasible region, from ``2 nx`` LPs."""
    qp = build_opt(ta, qt, np.zeros(ta.gs.nx)).qp
    nx = ta.gs.nx
    # treat x as a free variable: [x; z] with x - s0 - (...) = t
    A_eq = np.hstack([-np.eye(nx), qp.A_eq])
    A_ub = np.hstack([np.zeros((qp.A_ub.shape[0], nx)), qp.A_ub])
    b_eq = -qt.t
    lo, hi = np.zeros(nx), np.zeros(nx)
    for i in range(nx):
        c = np.zeros(nx + qp.n)
        c[i] = 1.0
        hi[i] = solve_lp(LinearProgram(c, A_ub, qp.b_ub, A_eq, b_eq)).value
        lo[i] = -solve_lp(LinearProgram(-c, A_ub, qp.b_ub, A_eq, b_eq)).value
    return lo, hi


@dataclass
class MpcSolution:
    status: QpStatus
    s0: np.ndarray = None
    c: np.ndarray = None
    value: float = float("nan")

    @property
    def feasible(self):
        return self.status is QpStatus.OPTIMAL


def solve_opt(ta, qt, x):
    prob = build_opt(ta, qt, x)
    res = solve_qp(prob.qp)
    if not res.optimal:
        return MpcSolution(res.status)
    nx, d = prob.nx, prob.n_lifted
    return MpcSolution(res.status, res.x[:nx], res.x[nx:d], res.value)


@dataclass
class ControllerOptions:
    mode: str = "UQ-RMPC"
    backup: str = "resolve"
    backup_disturbance_index: str = "k-2"
    eager_quantification: bool = False
    force_alpha_one: bool = False

    def __post_init__(self):
        if self.mode not in ("UQ-RMPC", "RMPC"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.backup not in ("resolve", "shift"):
            raise ValueError(f"unknown backup {self.backup!r}")
        if self.backup_disturbance_index not in ("k-2", "k-1"):
            raise ValueError("backup_disturbance_index must be 'k-2' or 'k-1'")


STEP_FIELDS = ["k", "x", "u", "w", "alpha", "nu", "branch", "feasible", "backup",
               "status", "violation", "s0"]


@dataclass
class RunRecord:
    """Append-only per-step log of a closed-loop run."""
    rows: list = field(default_factory=list)
    failure: str = None

    def append(self, **row):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    @property
    def success(self):
        return self.failure is None and not any(r["violation"] for r in self.rows)

    def column(self, name):
        return [r[name] for r in self.rows]

    def states(self):
        return np.array(self.column("x"))

    def inputs(self):
        return np.array(self.column("u"))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            nx = len(self.rows[0]["x"]) if self.rows else 0
            nu = len(self.rows[0]["u"]) if self.rows and self.rows[0]["u"] is not None else 0
            header = (["k"] + [f"x{i}" for i in range(nx)] + [f"u{i}" for i in range(nu)]
                      + [f"w{i}" for i in range(nx)]
                      + ["alpha", "nu", "branch", "feasible", "backup", "status", "violation"])
            writer.writerow(header)
            for r in self.rows:
                u = r["u"] if r["u"] is not None else [float("nan")] * nu
                w = r["w"] if r["w"] is not None else [float("nan")] * nx
                writer.writerow([r["k"]] + [repr(float(v)) for v in r["x"]]
                                + [repr(float(v)) for v in u] + [repr(float(v)) for v in w]
                                + [repr(float(r["alpha"])), r["nu"], r["branch"], int(r["feasible"]),
                                   int(r["backup"]), r["status"], int(r["violation"])])

    def summary(self):
        alphas = self.column("alpha")
        return {
            "success": self.success,
            "steps": len(self.rows),
            "failure": self.failure,
            "backups": int(sum(r["backup"] for r in self.rows)),
            "violations": int(sum(r["violation"] for r in self.rows)),
            "final_alpha": float(alphas[-1]) if alphas else None,
            "branches": {b: self.column("branch").count(b) for b in sorted(set(self.column("branch")))},
        }

    def summary_json(self):
        return json.dumps(self.summary(), indent=1, sort_keys=True)


class Controller:
    """Tube MPC with online disturbance-set quantification.

    In ``RMPC`` mode only the conservative problem is ever solved. In
    ``UQ-RMPC`` mode the conservative problem is tried first; when it is
    infeasible the quantified tube is used, with a backup re-solve of the
    previously solved problem at a predicted state if that also fails.
    """

    def __init__(self, ta, log0=None, options=None):
        self.ta = ta
        self.opts = options or ControllerOptions()
        self.log = log0 if log0 is not None else DisturbanceLog(ta.W)
        self.k = 0
        self.x_hist, self.u_hist, self.w_hist = [], [], []
        self.quant = None
        self._quantified_upto = 0
        self.last_tube = None
        self.last_c = None
        self.conservative = conservative_tube(ta)
        self.current_tube = None

    @property
    def qset(self):
        return None if self.quant is None else self.quant.qset(self.ta.W)

    def _observe(self, x):
        if self.k >= 1:
            gs = self.ta.gs
            w = x - gs.A @ self.x_hist[-1] - gs.B @ self.u_hist[-1]
            self.log.append(w)
            self.w_hist.append(w)

    def _quantify(self):
        W = self.ta.W
        if self.quant is None:
            self.quant = quantify_batch(self.log, W)
        else:
            for i in range(self._quantified_upto, len(self.log)):
                self.quant = quantify_recursive(self.quant, self.log[i], W)
        self._quantified_upto = len(self.log)

    def _tube_for_quantified(self):
        if self.opts.force_alpha_one:
            return quantified_tube(self.ta, QuantifiedSet(self.ta.W, np.zeros(self.ta.gs.nx), 1.0))
        return quantified_tube(self.ta, self.quant.qset(self.ta.W))

    def _backup(self, x):
        if self.k < 2 or self.last_tube is None:
            raise BackupUnavailable(f"no backup at step {self.k}")
        if self.opts.backup == "shift":
            nu = self.ta.gs.nu
            c = np.concatenate([self.last_c[nu:], np.zeros(nu)])
            return MpcSolution(QpStatus.OPTIMAL, None, c), self.last_tube
        gs = self.ta.gs
        w_prev = self.w_hist[-2] if self.opts.backup_disturbance_index == "k-2" else self.w_hist[-1]
        x_pred = gs.Phi @ self.x_hist[-1] + gs.B @ self.last_c[:gs.nu] + w_prev
        sol = solve_opt(self.ta, self.last_tube, x_pred)
        if not sol.feasible:
            raise BackupInfeasible(f"backup problem infeasible at step {self.k}")
        return sol, self.last_tube

    def step(self, x):
        """Return ``(u, info)`` for the measured state ``x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        self._observe(x)
        if self.opts.eager_quantification and self.opts.mode == "UQ-RMPC":
            self._quantify()
        backup = False
        if self.opts.mode == "RMPC":
            tube, branch = self.conservative, "conservative"
            sol = solve_opt(self.ta, tube, x)
            if not sol.feasible:
                raise BackupInfeasible(f"conservative problem infeasible at step {self.k}")
        else:
            sol = None
            if not self.opts.force_alpha_one:
                tube, branch = self.conservative, "conservative"
                sol = solve_opt(self.ta, tube, x)
            if sol is None or not sol.feasible:
                self._quantify()
                tube, branch = self._tube_for_quantified(), "quantified"
                sol = solve_opt(self.ta, tube, x)
                if not sol.feasible:
                    sol, tube = self._backup(x)
                    branch, backup = "backup", True
        gs = self.ta.gs
        u = gs.K @ x + sol.c[:gs.nu]
        self.x_hist.append(x)
        self.u_hist.append(u)
        self.last_tube, self.last_c = tube, sol.c
        self.current_tube = tube
        self.k += 1
        q_alpha = self.quant.alpha if self.quant is not None else 1.0
        return u, {"branch": branch, "backup": backup, "alpha": q_alpha, "nu": tube.nu,
                   "status": sol.status.value, "s0": sol.s0}
