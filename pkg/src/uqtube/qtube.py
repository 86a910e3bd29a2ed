"""Closed-form tube, tightening and horizon for a quantified disturbance set."""
from dataclasses import dataclass

import numpy as np

from .errors import IterationLimit
from .numkernel import matrix_power
from .poly import QuantifiedSet


@dataclass(frozen=True)
class QuantifiedTube:
    """Tube cross-section ``alpha * S + t`` with its tightening and horizon.

    ``qset`` is ``None`` for the conservative tube built on ``W`` itself.
    """
    alpha: float
    t: np.ndarray
    h_star: np.ndarray = None
    nu: int = None
    zeta: float = 1.0
    qset: QuantifiedSet = None

    @property
    def conservative(self):
        return self.qset is None


def conservative_tube(ta):
    return QuantifiedTube(1.0, np.zeros(ta.gs.nx), ta.h_s.copy(), ta.nu_s, 1.0, None)


def update_tube(ta, qs):
    """Translate ``t = (1 - alpha)(I - Phi)^{-1} v``; geometry only."""
    t = (1.0 - qs.alpha) * (ta.inv_I_minus_Phi @ qs.v)
    return QuantifiedTube(qs.alpha, t, qset=qs)


def tightening_hstar(ta, qt):
    return qt.alpha * ta.h_s + ta.gs.FK @ qt.t


def horizon_nuk(ta, h_star, max_nu=1000):
    """Ellipsoid-based admissibility horizon; returns ``(nu, zeta)``.

    Increments ``nu`` from ``nu_s`` until
    ``zeta^2 * f_j P_s^{-1} f_j' <= (1 - h*_j)^2`` for every row ``f_j`` of
    ``Fbar Psi^{nu+1}``.
    """
    q_s = 1.0 - ta.h_s
    q = 1.0 - np.asarray(h_star)
    zeta = float(np.max(q / q_s))
    Psi, Fbar, Pinv = ta.gs.Psi, ta.gs.Fbar, ta.P_s_inv
    P = matrix_power(Psi, ta.nu_s + 1)
    for nu in range(ta.nu_s, max_nu + 1):
        Fn = Fbar @ P
        quad = np.einsum("ij,jk,ik->i", Fn, Pinv, Fn)
        if np.all(zeta ** 2 * quad <= q ** 2):
            return nu, zeta
        P = Psi @ P
    raise IterationLimit(f"nu_k exceeds {max_nu}")


def quantified_tube(ta, qs):
    """Tube, ``h*`` and ``nu_k`` for the quantified set ``qs``."""
    geo = update_tube(ta, qs)
    h = tightening_hstar(ta, geo)
    nu, zeta = horizon_nuk(ta, h)
    return QuantifiedTube(geo.alpha, geo.t, h, nu, zeta, qs)
