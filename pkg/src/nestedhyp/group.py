"""Lorentz transformations: construction, validation and factorizations.

Matrices act on column vectors, so a point cloud ``X`` of shape ``(N, n+1)``
is transformed by ``X @ A.T``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .config import TOL
from .errors import DegenerateInputError, DimensionError, InvalidLorentzError, InvalidRotationError
from .lorentz import _rng, check_point, lorentz_inner, minkowski_form


def _square(A, what="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{what} must be square, got shape {A.shape}")
    return A


def rotation_residual(R):
    R = _square(R, "rotation")
    orth = np.max(np.abs(R.T @ R - np.eye(R.shape[0])))
    return max(float(orth), abs(float(np.linalg.det(R)) - 1.0))


def is_rotation(R, tol=None) -> bool:
    tol = TOL.det if tol is None else tol
    return rotation_residual(R) <= tol


def check_rotation(R, tol=None):
    R = _square(R, "rotation")
    if not is_rotation(R, tol):
        raise InvalidRotationError(f"matrix is not in SO({R.shape[0]}) "
                                   f"(residual {rotation_residual(R):.3e})")
    return R


def lorentz_residual(A):
    """Largest entrywise violation of A J A^T = J and A^T J A = J.

    Residuals are divided by max(1, max|a_ij|^2) since roundoff grows with the
    entries. Returns inf when a_00 <= 0.
    """
    A = _square(A, "Lorentz matrix")
    J = minkowski_form(A.shape[0] - 1)
    scale = max(1.0, float(np.max(np.abs(A))) ** 2)
    r1 = np.max(np.abs(A @ J @ A.T - J)) / scale
    r2 = np.max(np.abs(A.T @ J @ A - J)) / scale
    return float(max(r1, r2)) if A[0, 0] > 0 else float("inf")


def is_lorentz(A, tol=None) -> bool:
    tol = TOL.group if tol is None else tol
    A = _square(A, "Lorentz matrix")
    if lorentz_residual(A) > tol:
        return False
    return abs(float(np.linalg.det(A)) - 1.0) <= TOL.det * max(1.0, float(np.max(np.abs(A))))


def check_lorentz(A, tol=None):
    A = _square(A, "Lorentz matrix")
    if not is_lorentz(A, tol):
        raise InvalidLorentzError(f"matrix is not in SO+(1,{A.shape[0] - 1}) "
                                  f"(residual {lorentz_residual(A):.3e})")
    return A


def lorentz_inverse(A):
    """A^{-1} = J A^T J for A in O(1, n)."""
    A = np.asarray(A, dtype=float)
    J = minkowski_form(A.shape[0] - 1)
    return J @ A.T @ J


def boost_along_first_axis(alpha: float, n: int) -> np.ndarray:
    """Boost by rapidity ``alpha`` mixing coordinates 0 and 1 of R^{1,n}."""
    if n < 1:
        raise DimensionError("boost needs n >= 1")
    B = np.eye(n + 1)
    c, s = np.cosh(alpha), np.sinh(alpha)
    B[0, 0] = B[1, 1] = c
    B[0, 1] = B[1, 0] = s
    return B


def boost_derivative(alpha: float, n: int) -> np.ndarray:
    """d/d(alpha) of :func:`boost_along_first_axis`."""
    D = np.zeros((n + 1, n + 1))
    c, s = np.cosh(alpha), np.sinh(alpha)
    D[0, 0] = D[1, 1] = s
    D[0, 1] = D[1, 0] = c
    return D


def rotation_embed(R) -> np.ndarray:
    """diag(1, R): a Lorentz rotation fixing the origin."""
    R = check_rotation(R)
    n = R.shape[0]
    A = np.eye(n + 1)
    A[1:, 1:] = R
    return A


def pure_boost(v) -> np.ndarray:
    """Symmetric boost [[c, v^T], [v, sqrt(I + v v^T)]] with c = sqrt(1 + |v|^2)."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    c = np.sqrt(1.0 + v @ v)
    B = np.empty((n + 1, n + 1))
    B[0, 0] = c
    B[0, 1:] = v
    B[1:, 0] = v
    # sqrt(I + v v^T) = I + v v^T / (1 + c)
    B[1:, 1:] = np.eye(n) + np.outer(v, v) / (1.0 + c)
    return B


def origin_boost(mu) -> np.ndarray:
    """The pure boost carrying the origin [1, 0, ..., 0] to ``mu``."""
    mu = check_point(mu, what="mu")
    return pure_boost(mu[1:])


def adapted_gram_schmidt(M) -> np.ndarray:
    """Lorentz-orthonormalize the columns of ``M``.

    Column 0 must be timelike with a positive first entry and becomes the unit
    timelike e_0; later columns become unit spacelike vectors. The last column
    is negated if needed so the result has determinant +1.

    Raises
    ------
    DegenerateInputError
        When column ``k`` has the wrong causal character or is (numerically)
        dependent on the previous ones; ``err.step == k``.
    """
    M = _square(M, "input")
    size = M.shape[0]
    if size < 2:
        raise DimensionError("need at least a 2x2 matrix")
    E = np.zeros_like(M)
    eps = np.ones(size)
    eps[0] = -1.0
    c0 = M[:, 0]
    q0 = lorentz_inner(c0, c0)
    if not (q0 < -TOL.degenerate and c0[0] > 0):
        raise DegenerateInputError("column 0 must be timelike with positive first entry", step=0)
    E[:, 0] = c0 / np.sqrt(-q0)
    for k in range(1, size):
        w = M[:, k].copy()
        for _ in range(2):  # second sweep restores orthogonality lost to roundoff
            coeffs = lorentz_inner(E[:, :k].T, w)
            w = w - E[:, :k] @ (eps[:k] * coeffs)
        q = lorentz_inner(w, w)
        if q < TOL.degenerate:
            raise DegenerateInputError(f"column {k} is degenerate (<w,w>_L = {q:.3e})", step=k)
        E[:, k] = w / np.sqrt(q)
    if np.linalg.det(E) < 0:
        E[:, -1] = -E[:, -1]
    return E


def random_rotation(n: int, seed=None) -> np.ndarray:
    """Haar-random element of SO(n) via QR of a Gaussian matrix."""
    rng = _rng(seed)
    if n == 1:
        return np.ones((1, 1))
    G = rng.standard_normal((n, n))
    Qm, Rm = np.linalg.qr(G)
    Qm = Qm * np.sign(np.diag(Rm))
    if np.linalg.det(Qm) < 0:
        Qm[:, 0] = -Qm[:, 0]
    return Qm


def compose(P, alpha, Q) -> np.ndarray:
    """diag(1, P) . boost(alpha) . diag(1, Q^T)."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    left = np.zeros((P.shape[0] + 1, n + 1))
    left[0, 0] = 1.0
    left[1:, 1:] = P
    right = np.eye(n + 1)
    right[1:, 1:] = Q.T
    return left @ boost_along_first_axis(alpha, n) @ right


def random_lorentz(n: int, seed=None) -> np.ndarray:
    """diag(1,P) boost(alpha) diag(1,Q^T) with Haar P, Q and alpha ~ N(0, 1)."""
    if n < 1:
        raise DimensionError("n must be >= 1")
    rng = _rng(seed)
    P = random_rotation(n, rng)
    Q = random_rotation(n, rng)
    alpha = rng.standard_normal()
    return compose(P, alpha, Q)


def _nearest_rotation(M):
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, -1] = -U[:, -1]
        R = U @ Vt
    return R


def _complete_rotation(q1):
    """A rotation whose first column is the unit vector ``q1``."""
    n = q1.shape[0]
    basis = np.column_stack([q1, np.eye(n)])
    Qm, _ = np.linalg.qr(basis)
    Qm = Qm[:, :n]
    if Qm[:, 0] @ q1 < 0:
        Qm = -Qm
    if np.linalg.det(Qm) < 0:
        Qm[:, -1] = -Qm[:, -1]
    return Qm


class AxisDecomposition(NamedTuple):
    """A = diag(1, P) . boost(alpha) . diag(1, Q^T)."""

    P: np.ndarray
    alpha: float
    Q: np.ndarray

    def recompose(self) -> np.ndarray:
        return compose(self.P, self.alpha, self.Q)


def axis_decompose(A) -> AxisDecomposition:
    """Factor a Lorentz matrix through a boost along the first axis.

    cosh(alpha) = a_00 and the first column/row of A fix the first columns of
    P and Q; the rest of Q is an arbitrary completion. For n = 1 the rotations
    are trivial, so alpha carries the sign of the boost.
    """
    A = check_lorentz(A)
    n = A.shape[0] - 1
    if n == 1:
        return AxisDecomposition(np.ones((1, 1)), float(np.arcsinh(A[1, 0])), np.ones((1, 1)))
    col = A[1:, 0]
    row = A[0, 1:]
    s = 0.5 * (np.linalg.norm(col) + np.linalg.norm(row))
    alpha = float(np.arcsinh(s))
    if alpha < 1e-10:
        return AxisDecomposition(_nearest_rotation(A[1:, 1:]), 0.0, np.eye(n))
    q1 = row / np.linalg.norm(row)
    Q = _complete_rotation(q1)
    D_inv = np.ones(n)
    D_inv[0] = 1.0 / np.cosh(alpha)
    P = (A[1:, 1:] @ Q) * D_inv
    P[:, 0] = col / np.linalg.norm(col)
    return AxisDecomposition(_nearest_rotation(P), alpha, Q)


def polar_decompose(A):
    """Return ``(rotation, boost)`` with A = rotation . boost.

    ``rotation`` is diag(1, R) and ``boost`` the symmetric pure boost whose
    velocity is the spatial part of the first row of A.
    """
    A = check_lorentz(A)
    B = pure_boost(A[0, 1:])
    rotation = A @ lorentz_inverse(B)
    return rotation, B


def compose_gradients(P, alpha, Q, G):
    """Pull an ambient gradient ``G = dL/dA`` back to the factors of :func:`compose`.

    Works for the non-square case where ``P`` has fewer rows than ``Q``
    (A is then (m+1) x (n+1)). Returns ``(dP, dalpha, dQ)``.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    G = np.asarray(G, dtype=float)
    n = Q.shape[0]
    left = np.zeros((P.shape[0] + 1, n + 1))
    left[0, 0] = 1.0
    left[1:, 1:] = P
    right = np.eye(n + 1)
    right[1:, 1:] = Q.T
    B = boost_along_first_axis(alpha, n)
    dP = (G @ (B @ right).T)[1:, 1:]
    dB = left.T @ G @ right.T
    dalpha = float(np.sum(dB * boost_derivative(alpha, n)))
    dQ = ((left @ B).T @ G)[1:, 1:].T
    return dP, dalpha, dQ
