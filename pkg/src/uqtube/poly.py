"""Half-space polytopes, homothetic disturbance sets and planar helpers."""
import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DimensionUnsupported, EmptyPolytope, SolverError
from .lp import LinearProgram, LpStatus, solve_lp

MEMBER_TOL = 1e-8
MERGE_TOL = 1e-7


class Polytope:
    """``{x : V x <= b}``; ``b`` defaults to the all-ones vector."""

    def __init__(self, V, b=None, check=True):
        self.V = np.atleast_2d(np.asarray(V, dtype=float))
        self.b = np.ones(self.V.shape[0]) if b is None else np.asarray(b, dtype=float).reshape(-1)
        if self.b.size != self.V.shape[0]:
            raise DimensionMismatch("V and b row counts differ")
        if check:
            res = solve_lp(LinearProgram(np.zeros(self.dim), self.V, self.b))
            if not res.optimal:
                raise EmptyPolytope("polytope has no points")

    @property
    def dim(self):
        return self.V.shape[1]

    def __repr__(self):
        return f"Polytope(n_facets={self.V.shape[0]}, dim={self.dim})"

    def to_dict(self):
        return {"V": self.V.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["V"], d.get("b"))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def is_compact(self):
        eye = np.eye(self.dim)
        try:
            return all(np.isfinite(support(self, s * e)) for e in eye for s in (1.0, -1.0))
        except SolverError:
            return False

    def scaled(self, alpha, shift=None):
        """``alpha * P + shift`` for ``alpha > 0``."""
        shift = np.zeros(self.dim) if shift is None else np.asarray(shift, dtype=float)
        return Polytope(self.V, alpha * self.b + self.V @ shift, check=False)


def box(lower, upper):
    lower, upper = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
    n = lower.size
    return Polytope(np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([upper, -lower]))


def contains(P, x, tol=MEMBER_TOL):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != P.dim:
        raise DimensionMismatch(f"point has dim {x.size}, polytope {P.dim}")
    return bool(np.all(P.V @ x <= P.b + tol))


def support(P, f):
    """``max f @ x`` over ``P``; ``inf`` when unbounded in direction ``f``."""
    f = np.asarray(f, dtype=float).reshape(-1)
    if not np.any(f):
        return 0.0
    res = solve_lp(LinearProgram(f, P.V, P.b))
    if res.status is LpStatus.UNBOUNDED:
        return float("inf")
    if res.status is LpStatus.INFEASIBLE:
        raise EmptyPolytope("support of an empty set")
    return res.value


@dataclass(frozen=True)
class QuantifiedSet:
    """The homothet ``(1 - alpha) v + alpha W`` of a base set ``W = {Vw <= 1}``."""
    base: Polytope
    v: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(-1))
        if not np.allclose(self.base.b, 1.0):
            raise ValueError("the base set must be normalised to {V w <= 1}")
        if not (-1e-12 <= self.alpha <= 1 + 1e-12):
            raise ValueError(f"alpha={self.alpha} outside [0, 1]")
        object.__setattr__(self, "alpha", float(min(max(self.alpha, 0.0), 1.0)))

    @property
    def rhs(self):
        """Right-hand side of the H-representation ``V w <= rhs``."""
        return self.alpha + (1.0 - self.alpha) * (self.base.V @ self.v)

    def as_polytope(self):
        return Polytope(self.base.V, self.rhs, check=False)

    def contains_set(self, other, tol=MEMBER_TOL):
        """Nesting test for two homothets of the same base set."""
        return bool(np.all(other.rhs <= self.rhs + tol))


def quantified_contains(Q, w, tol=MEMBER_TOL):
    w = np.asarray(w, dtype=float).reshape(-1)
    return bool(np.all(Q.base.V @ w <= Q.rhs + tol))


def vertices_2d(P):
    """Counter-clockwise vertices of a planar polytope."""
    if P.dim != 2:
        raise DimensionUnsupported("vertex enumeration is planar only")
    V, b = P.V, P.b
    pts = []
    for i in range(len(b)):
        for j in range(i + 1, len(b)):
            M = V[[i, j]]
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            if abs(det) < 1e-12 * max(1.0, np.abs(M).max() ** 2):
                continue
            x = np.linalg.solve(M, b[[i, j]])
            if np.all(V @ x <= b + MERGE_TOL * (1.0 + np.abs(b))):
                pts.append(x)
    merged = []
    for p in pts:
        if not any(np.abs(p - q).max() <= MERGE_TOL for q in merged):
            merged.append(p)
    if len(merged) <= 2:
        return merged
    return convex_hull_2d(np.array(merged))


def convex_hull_2d(points):
    """Monotone-chain hull, counter-clockwise, collinear points dropped."""
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points, dtype=float)})
    if len(pts) <= 2:
        return [np.array(p) for p in pts]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 1e-15:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 1e-15:
            upper.pop()
        upper.append(p)
    return [np.array(p) for p in lower[:-1] + upper[:-1]]


def polygon_area(verts):
    if len(verts) < 3:
        return 0.0
    v = np.asarray(verts)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def area_2d(P):
    return polygon_area(vertices_2d(P))


def minkowski_sum_2d(*vertex_lists):
    """Vertices of the Minkowski sum of planar convex polygons."""
    acc = np.zeros((1, 2))
    for verts in vertex_lists:
        verts = np.atleast_2d(np.asarray(verts, dtype=float))
        acc = (acc[:, None, :] + verts[None, :, :]).reshape(-1, 2)
        acc = np.array(convex_hull_2d(acc))
    return [np.array(p) for p in acc]


def from_vertices_2d(verts):
    """Normalised H-representation ``{V x <= 1}`` of a polygon with 0 in its interior."""
    hull = convex_hull_2d(verts)
    rows = []
    for a, b in zip(hull, hull[1:] + hull[:1]):
        normal = np.array([b[1] - a[1], a[0] - b[0]])
        offset = normal @ a
        if offset <= 0:
            raise ValueError("origin is not interior to the polygon")
        rows.append(normal / offset)
    return Polytope(np.array(rows))
