"""LQR gain synthesis and the lifted prediction matrices."""
import json
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, UnstableClosedLoop
from .numkernel import as_matrix, solve_linear, spectral_radius


@dataclass
class GainSynthesis:
    """Feedback gain, cost matrices and lifted autonomous dynamics.

    The lifted state is ``z = [s; c_0; ...; c_{N-1}]`` with ``z+ = Psi z`` and
    constraint map ``Fbar z <= 1 - h``.
    """
    A: np.ndarray
    B: np.ndarray
    P_x: np.ndarray
    K: np.ndarray
    Q: np.ndarray = None
    R: np.ndarray = None
    N: int = 0
    P_c: np.ndarray = None
    Psi: np.ndarray = None
    Fbar: np.ndarray = None
    E: np.ndarray = None
    M: np.ndarray = None
    F: np.ndarray = None
    G: np.ndarray = None

    @property
    def Phi(self):
        return self.A + self.B @ self.K

    @property
    def nx(self):
        return self.A.shape[0]

    @property
    def nu(self):
        return self.B.shape[1]

    @property
    def FK(self):
        return self.F + self.G @ self.K

    def to_dict(self):
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: (np.asarray(v, dtype=float) if isinstance(v, list) else v) for k, v in d.items()})

    def to_json(self):
        return json.dumps(self.to_dict())


def dare_residual(A, B, Q, R, P):
    BtP = B.T @ P
    return A.T @ P @ A + Q - A.T @ P @ B @ solve_linear(BtP @ B + R, BtP @ A) - P


def solve_dare(A, B, Q, R, tol=1e-12, max_iter=100_000):
    """Riccati fixed-point iteration from ``P = Q``; returns ``GainSynthesis`` with ``P_x`` and ``K``."""
    A, B, Q, R = (as_matrix(m) for m in (A, B, Q, R))
    P = Q.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        P_next = A.T @ P @ A + Q - A.T @ P @ B @ solve_linear(BtP @ B + R, BtP @ A)
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)) or np.abs(P_next).max() > 1e100:
            raise NoConvergence("Riccati iteration diverged")
        done = np.abs(P_next - P).max() <= tol
        P = P_next
        if done:
            break
    else:
        raise NoConvergence("Riccati iteration did not converge")
    K = -solve_linear(B.T @ P @ B + R, B.T @ P @ A)
    if spectral_radius(A + B @ K) >= 1.0:
        raise UnstableClosedLoop("A + BK is not strictly stable")
    return GainSynthesis(A=A, B=B, P_x=P, K=K, Q=Q, R=R)


def build_lifted(gs, N, F, G):
    """Complete ``gs`` with ``E``, ``M``, ``Psi``, ``Fbar`` and ``P_c`` for horizon ``N``."""
    if N < 1:
        raise ValueError("horizon must be at least 1")
    F, G = as_matrix(F), as_matrix(G)
    nx, nu = gs.nx, gs.nu
    E = np.zeros((nu, N * nu))
    E[:, :nu] = np.eye(nu)
    M = np.eye(N * nu, k=nu)
    Psi = np.block([[gs.Phi, gs.B @ E], [np.zeros((N * nu, nx)), M]])
    Fbar = np.hstack([F + G @ gs.K, G @ E])
    block = gs.B.T @ gs.P_x @ gs.B + gs.R
    P_c = np.kron(np.eye(N), block)
    gs.N, gs.E, gs.M, gs.Psi, gs.Fbar, gs.P_c, gs.F, gs.G = N, E, M, Psi, Fbar, P_c, F, G
    return gs
