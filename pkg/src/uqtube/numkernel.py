"""Small dense linear-algebra kernels.

Matrices and vectors are plain ``numpy`` float arrays. The kernels here exist
so that singularity is reported with one consistent, row-scaled threshold.
"""
import numpy as np

from .errors import DimensionMismatch, SingularMatrix

PIVOT_TOL = 1e-12


def as_matrix(a, name="matrix"):
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if m.ndim != 2 or 0 in m.shape:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def as_vector(x, name="vector"):
    v = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def _lu_factor(a):
    """Row-scaled partial-pivot LU. Returns (lu, perm)."""
    a = as_matrix(a)
    n, m = a.shape
    if n != m:
        raise DimensionMismatch("square matrix required")
    lu = a.copy()
    scale = np.abs(lu).max(axis=1)
    if np.any(scale == 0.0):
        raise SingularMatrix("matrix has a zero row")
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < PIVOT_TOL * scale[perm[p]]:
            raise SingularMatrix(f"pivot {k} below tolerance")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def _lu_solve(lu, perm, b):
    n = lu.shape[0]
    x = b[perm].astype(float)
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


def solve_linear(a, b):
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    lu, perm = _lu_factor(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != lu.shape[0]:
        raise DimensionMismatch("rhs length does not match matrix")
    if b.ndim == 1:
        return _lu_solve(lu, perm, b)
    return np.column_stack([_lu_solve(lu, perm, b[:, j]) for j in range(b.shape[1])])


def inverse(a):
    a = as_matrix(a)
    return solve_linear(a, np.eye(a.shape[0]))


def matrix_power(a, k):
    """``a**k`` by repeated squaring; ``a**0`` is the identity."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch("square matrix required")
    if k < 0:
        raise ValueError("k must be non-negative")
    result = np.eye(a.shape[0])
    base = a.copy()
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return result


def powers(a, count):
    """List ``[a**0, a**1, ..., a**(count-1)]`` by iterated products."""
    a = as_matrix(a)
    out = [np.eye(a.shape[0])]
    for _ in range(1, count):
        out.append(out[-1] @ a)
    return out[:count]


def spectral_radius(a, squarings=60):
    """Spectral radius from Gelfand's formula ``rho = lim ||a^k||^(1/k)``.

    ``a^(2^j)`` is formed by repeated squaring with renormalisation, so the
    estimate behaves like power iteration on the whole matrix but does not
    oscillate when the dominant eigenvalues are a complex pair.
    """
    b = as_matrix(a)
    nrm = np.abs(b).max()
    if nrm == 0.0:
        return 0.0
    b = b / nrm
    log_scale = np.log(nrm)
    for j in range(1, squarings + 1):
        b = b @ b
        nrm = np.abs(b).max()
        if nrm == 0.0:
            return 0.0
        b /= nrm
        log_scale = 2.0 * log_scale + np.log(nrm)
        if not np.isfinite(log_scale):
            break
        est = log_scale / 2.0 ** j
    return float(np.exp(est))
