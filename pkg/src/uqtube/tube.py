"""Offline rigid-tube pipeline for the conservative disturbance set.

The tube cross-section ``S = 1/(1-rho) * (W + Phi W + ... + Phi^{r-1} W)`` is
never built explicitly; every quantity needed online is a support function of
``S``, which splits into a sum of supports of ``W``.
"""
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import IterationLimit, StructurallyInfeasible, UnboundedOmega
from .lp import LinearProgram, LpStatus, solve_lp
from .numkernel import inverse, matrix_power, powers
from .poly import Polytope, support
from .riccati import GainSynthesis, build_lifted, solve_dare

ADMISSIBLE_TOL = 1e-9


@dataclass
class RpiTube:
    r: int
    rho: float
    Phi: np.ndarray
    W: Polytope

    @property
    def scale(self):
        return 1.0 / (1.0 - self.rho)

    @cached_property
    def generators(self):
        return powers(self.Phi, self.r)

    def support(self, f):
        """Support function of ``S`` in direction ``f``."""
        f = np.asarray(f, dtype=float)
        return self.scale * sum(support(self.W, Pi.T @ f) for Pi in self.generators)

    def contraction_slack(self):
        """``rho - max_i h_W(Phi^r' V_i)``; non-negative iff ``Phi^r W`` lies in ``rho W``."""
        Pr = matrix_power(self.Phi, self.r)
        return self.rho - max(support(self.W, Pr.T @ vi) for vi in self.W.V)


def find_contraction(Phi, W, rho_target, max_r=200):
    """Smallest ``r`` with ``Phi^r W`` inside ``rho_target * W``."""
    if not 0.0 < rho_target < 1.0:
        raise ValueError("rho_target must lie in (0, 1)")
    Pr = np.eye(Phi.shape[0])
    for r in range(1, max_r + 1):
        Pr = Pr @ Phi
        achieved = max(support(W, Pr.T @ vi) for vi in W.V)
        if achieved <= rho_target:
            return r, rho_target
    raise IterationLimit(f"no contraction within r={max_r}")


def tightening_hs(tube, F, G, K):
    FK = np.asarray(F) + np.asarray(G) @ np.asarray(K)
    return np.array([tube.support(row) for row in FK])


def constraint_stack(Psi, Fbar, nu):
    """Rows ``Fbar Psi^i`` for ``i = 0..nu``."""
    blocks, P = [], np.eye(Psi.shape[0])
    for _ in range(nu + 1):
        blocks.append(Fbar @ P)
        P = Psi @ P
    return np.vstack(blocks)


def admissible(Psi, Fbar, h, nu, tol=ADMISSIBLE_TOL):
    """Exact check that ``Fbar Psi^{nu+1} z <= 1 - h`` on ``Omega(1 - h, nu)``.

    Returns ``None`` if some row is unbounded, otherwise a bool.
    """
    q = 1.0 - np.asarray(h)
    rows = constraint_stack(Psi, Fbar, nu)
    rhs = np.tile(q, nu + 1)
    nxt = Fbar @ matrix_power(Psi, nu + 1)
    for j, c in enumerate(nxt):
        if not np.any(c):
            if q[j] < -tol:
                return False
            continue
        res = solve_lp(LinearProgram(c, rows, rhs))
        if res.status is LpStatus.UNBOUNDED:
            return None
        if res.status is LpStatus.INFEASIBLE:
            return True
        if res.value > q[j] + tol:
            return False
    return True


def admissibility_horizon(Psi, Fbar, h, max_nu=500):
    """First ``nu >= 0`` for which the constraint set is finitely determined."""
    for nu in range(max_nu + 1):
        if admissible(Psi, Fbar, h, nu):
            return nu
    raise IterationLimit(f"admissibility horizon exceeds {max_nu}")


def covering_ellipsoid(Psi, Fbar, h, nu):
    """Diagonal ``P_s`` with ``{z' P_s z <= 1}`` covering ``Omega(1 - h, nu)``."""
    d = Psi.shape[0]
    rows = constraint_stack(Psi, Fbar, nu)
    rhs = np.tile(1.0 - np.asarray(h), nu + 1)
    m = np.zeros(d)
    for i in range(d):
        for sign in (1.0, -1.0):
            c = np.zeros(d)
            c[i] = sign
            res = solve_lp(LinearProgram(c, rows, rhs))
            if res.status is not LpStatus.OPTIMAL:
                raise UnboundedOmega(f"Omega unbounded along coordinate {i}")
            m[i] = max(m[i], abs(res.value))
    m = np.maximum(m, 1e-12)
    return np.diag(1.0 / (d * m ** 2))


@dataclass
class TubeArtifacts:
    """Everything the online controller needs from the offline phase."""
    gs: GainSynthesis
    tube: RpiTube
    h_s: np.ndarray
    nu_s: int
    P_s: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def W(self):
        return self.tube.W

    @cached_property
    def inv_I_minus_Phi(self):
        return inverse(np.eye(self.gs.nx) - self.gs.Phi)

    @cached_property
    def P_s_inv(self):
        return inverse(self.P_s)

    def stack(self, nu):
        """Cached ``(rows, count)`` of ``Fbar Psi^i`` for ``i = 0..nu``."""
        if nu not in self._cache:
            self._cache[nu] = constraint_stack(self.gs.Psi, self.gs.Fbar, nu)
        return self._cache[nu]

    def to_dict(self):
        return {
            "gain": self.gs.to_dict(),
            "tube": {"r": self.tube.r, "rho": self.tube.rho, "W": self.W.to_dict()},
            "h_s": self.h_s.tolist(),
            "nu_s": self.nu_s,
            "P_s": self.P_s.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        gs = GainSynthesis.from_dict(d["gain"])
        t = d["tube"]
        tube = RpiTube(int(t["r"]), float(t["rho"]), gs.Phi, Polytope.from_dict(t["W"]))
        return cls(gs, tube, np.asarray(d["h_s"], dtype=float), int(d["nu_s"]),
                   np.asarray(d["P_s"], dtype=float))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def summary(self):
        return {"r": self.tube.r, "rho": self.tube.rho, "h_s": self.h_s.tolist(),
                "nu_s": self.nu_s, "K": self.gs.K.tolist()}


def build_artifacts(A, B, Q, R, F, G, W, N, rho_target):
    """Run the full offline pipeline."""
    gs = solve_dare(A, B, Q, R)
    build_lifted(gs, N, F, G)
    r, rho = find_contraction(gs.Phi, W, rho_target)
    tube = RpiTube(r, rho, gs.Phi, W)
    h_s = tightening_hs(tube, gs.F, gs.G, gs.K)
    if np.any(h_s >= 1.0):
        raise StructurallyInfeasible(f"tightening h_s={h_s.tolist()} leaves no constraint budget")
    nu_s = admissibility_horizon(gs.Psi, gs.Fbar, h_s)
    P_s = covering_ellipsoid(gs.Psi, gs.Fbar, h_s, nu_s)
    return TubeArtifacts(gs, tube, h_s, nu_s, P_s)
