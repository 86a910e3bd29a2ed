"""Scenario-based quantification of the unknown disturbance set.

The quantified set is the smallest homothet ``(1-alpha) v + alpha W`` that
covers the observed samples. Substituting ``beta = 1 - alpha`` and
``y = beta v`` turns the search into an LP in ``(y, beta)``.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SampleOutsideW, SolverError
from .lp import LinearProgram, solve_lp
from .poly import MEMBER_TOL, QuantifiedSet, contains, quantified_contains


class DisturbanceLog:
    """Ordered record of disturbance samples, all inside ``W``."""

    def __init__(self, W, samples=()):
        self.W = W
        self._samples = []
        for w in samples:
            self.append(w)

    def append(self, w):
        w = np.asarray(w, dtype=float).reshape(-1)
        if not contains(self.W, w):
            raise SampleOutsideW(f"sample {w.tolist()} is not in W")
        self._samples.append(w)
        return self

    def __len__(self):
        return len(self._samples)

    def __getitem__(self, i):
        return self._samples[i]

    @property
    def samples(self):
        return np.array(self._samples).reshape(-1, self.W.dim)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"w{i}" for i in range(self.W.dim)])
            for w in self._samples:
                writer.writerow([repr(float(x)) for x in w])

    @classmethod
    def from_csv(cls, path, W):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows and not _is_numeric(rows[0]):
            rows = rows[1:]
        return cls(W, [[float(x) for x in row] for row in rows if row])


def _is_numeric(row):
    try:
        [float(x) for x in row]
        return True
    except ValueError:
        return False


def record_disturbance(log, x_next, x, u, A, B):
    """Append the residual ``x_next - A x - B u`` to ``log``."""
    w = np.asarray(x_next, dtype=float) - A @ np.asarray(x, dtype=float) - B @ np.atleast_1d(u)
    return log.append(w)


@dataclass(frozen=True)
class ScenarioSolution:
    y: np.ndarray
    beta: float
    v: np.ndarray
    alpha: float

    def qset(self, W):
        return QuantifiedSet(W, self.v, self.alpha)


def _homothet_lp(W, bound):
    """Smallest homothet whose facet offsets dominate ``bound`` (per facet of ``W``).

    Solves ``max beta`` s.t. ``-V y <= (1 - beta) - bound``, ``V y <= beta``,
    ``0 <= beta <= 1``.
    """
    V = W.V
    nv, nx = V.shape
    ones = np.ones((nv, 1))
    A_ub = np.vstack([np.hstack([-V, ones]), np.hstack([V, -ones])])
    b_ub = np.concatenate([1.0 - bound, np.zeros(nv)])
    lb = np.r_[np.full(nx, -np.inf), 0.0]
    ub = np.r_[np.full(nx, np.inf), 1.0]
    c = np.zeros(nx + 1)
    c[-1] = 1.0
    res = solve_lp(LinearProgram(c, A_ub, b_ub, lb=lb, ub=ub))
    if not res.optimal:
        raise SolverError(f"quantification LP returned {res.status.value}")
    y, beta = res.x[:nx], min(max(res.x[-1], 0.0), 1.0)
    v = y / beta if beta > 1e-12 else np.zeros(nx)
    return ScenarioSolution(y, beta, v, 1.0 - beta)


def quantify_batch(samples, W):
    """Minimal homothet of ``W`` containing every sample."""
    samples = samples.samples if isinstance(samples, DisturbanceLog) else np.atleast_2d(samples)
    if samples.size == 0:
        raise ValueError("at least one sample is required")
    # only the extreme sample along each facet normal can be binding
    bound = (samples @ W.V.T).max(axis=0)
    return _homothet_lp(W, bound)


def quantify_recursive(prev, w_new, W):
    """Smallest homothet containing both the previous set and ``w_new``."""
    w_new = np.asarray(w_new, dtype=float).reshape(-1)
    prev_set = prev.qset(W)
    if quantified_contains(prev_set, w_new):
        return prev
    bound = np.maximum(prev_set.rhs, W.V @ w_new)
    return _homothet_lp(W, bound)


def covers(sol, W, samples, tol=MEMBER_TOL):
    qs = sol.qset(W)
    return all(quantified_contains(qs, w, tol) for w in np.atleast_2d(samples))


def sample_complexity(eps, gamma, nx):
    """Number of samples after which the violation risk is at most ``eps`` with confidence ``1 - gamma``."""
    if not (0.0 < eps < 1.0 and 0.0 < gamma < 1.0):
        raise DomainError("eps and gamma must lie in (0, 1)")
    if nx < 1:
        raise DomainError("nx must be positive")
    return math.ceil(sample_bound(eps, gamma, nx))


def sample_bound(eps, gamma, nx):
    e = math.e
    return (1.0 / eps) * (e / (e - 1.0)) * (math.log(1.0 / gamma) + nx)
