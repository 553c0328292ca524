"""Geometry of the hyperboloid model of hyperbolic space.

Points of L^n are stored as ambient numpy arrays of length ``n + 1`` with the
time-like coordinate first. Every function broadcasts over leading axes, so a
point cloud is simply an array of shape ``(N, n + 1)``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .config import TOL
from .errors import (
    ConvergenceError,
    DimensionError,
    InputError,
    InvalidPointError,
    InvalidTangentError,
    OutOfDiskError,
)


def minkowski_form(n: int) -> np.ndarray:
    """Return J_n = diag(-1, I_n), an ``(n+1, n+1)`` matrix."""
    if n < 0:
        raise DimensionError(f"dimension must be nonnegative, got {n}")
    J = np.eye(n + 1)
    J[0, 0] = -1.0
    return J


def origin(n: int) -> np.ndarray:
    """The base point [1, 0, ..., 0] of L^n."""
    x = np.zeros(n + 1)
    x[0] = 1.0
    return x


def _check_same_length(u, v):
    if u.shape[-1] != v.shape[-1]:
        raise DimensionError(f"length mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    if u.shape[-1] < 2:
        raise DimensionError("Lorentzian vectors need length >= 2")


def lorentz_inner(u, v):
    """Lorentzian bilinear form -u_0 v_0 + sum_i u_i v_i over the last axis."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_same_length(u, v)
    return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]


class LorentzNorm(NamedTuple):
    """Lorentzian norm of a single vector.

    ``magnitude`` is sqrt(|<v,v>_L|); ``kind`` is ``"spacelike"``, ``"null"``
    or ``"timelike"`` (the latter meaning the norm is ``1j * magnitude``).
    """

    magnitude: float
    kind: str

    @property
    def value(self):
        return self.magnitude if self.kind != "timelike" else 1j * self.magnitude


def lorentz_norm(v, null_tol: float = 0.0) -> LorentzNorm:
    q = float(lorentz_inner(v, v))
    if abs(q) <= null_tol:
        return LorentzNorm(0.0 if q == 0.0 else float(np.sqrt(abs(q))), "null")
    if q > 0:
        return LorentzNorm(float(np.sqrt(q)), "spacelike")
    return LorentzNorm(float(np.sqrt(-q)), "timelike")


def lorentz_magnitude(v):
    """|‖v‖_L| = sqrt(|<v,v>_L|), vectorized."""
    return np.sqrt(np.abs(lorentz_inner(v, v)))


def normalize_timelike(y, what="vector"):
    """Scale timelike vectors with positive first entry onto the hyperboloid."""
    y = np.asarray(y, dtype=float)
    q = lorentz_inner(y, y)
    if np.any(q >= -TOL.degenerate) or np.any(y[..., 0] <= 0):
        raise InvalidPointError(f"{what} is not future timelike (<y,y>_L = {np.max(q):.3e})")
    return y / np.sqrt(-q)[..., None]


def point_residual(x):
    """Scale-aware violation of <x,x>_L = -1.

    Roundoff in the form grows like x_0^2, so the raw residual is divided by
    max(1, x_0^2); for points within a few units of the origin this is the
    absolute residual.
    """
    x = np.asarray(x, dtype=float)
    return np.abs(lorentz_inner(x, x) + 1.0) / np.maximum(1.0, x[..., 0] ** 2)


def is_point(x, tol=None) -> bool:
    tol = TOL.point if tol is None else tol
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2 or not np.all(np.isfinite(x)):
        return False
    return bool(np.all(point_residual(x) <= tol) and np.all(x[..., 0] > 0))


def check_point(x, tol=None, what="point"):
    """Validate hyperboloid points and return them as a float array."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise DimensionError(f"{what} must have at least 2 ambient coordinates")
    if not is_point(x, tol):
        worst = float(np.max(point_residual(x))) if np.all(np.isfinite(x)) else float("nan")
        raise InvalidPointError(f"{what} is not on the hyperboloid (residual {worst:.3e})")
    return x


def lift(spatial):
    """Canonical chart: x_tilde -> [sqrt(1 + |x_tilde|^2), x_tilde]."""
    s = np.asarray(spatial, dtype=float)
    if not np.all(np.isfinite(s)):
        raise InputError("lift requires finite coordinates")
    x0 = np.sqrt(1.0 + np.sum(s * s, axis=-1, keepdims=True))
    return np.concatenate([x0, s], axis=-1)


def project_tangent(x, u):
    """Lorentz-orthogonal projection of ambient vectors onto T_x L^n."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return u + lorentz_inner(x, u)[..., None] * x


def _to_origin_spatial(x, u):
    """Spatial block of B^{-1} u, where B is the pure boost taking the origin to x.

    Working in the boosted frame avoids the cancellation in y - cosh(theta) x
    that costs up to x_0^2 digits far from the origin.
    """
    xs = x[..., 1:]
    xu = np.sum(xs * u[..., 1:], axis=-1, keepdims=True)
    return u[..., 1:] - xs * u[..., :1] + xs * xu / (1.0 + x[..., :1])


def _from_origin_spatial(x, w0, ws):
    """Spatial block of B [w0, ws]."""
    xs = x[..., 1:]
    xw = np.sum(xs * ws, axis=-1, keepdims=True)
    return xs * w0 + ws + xs * xw / (1.0 + x[..., :1])


def exp_map(x, v):
    """Exponential map Exp_x(v) = cosh(|v|) x + sinh(|v|) v / |v|.

    Evaluated as B Exp_origin(B^{-1} v) with B the pure boost taking the
    origin to x; the time coordinate is recomputed from the spatial block.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_same_length(x, v)
    q = lorentz_inner(v, v)
    scale = np.maximum(1.0, np.sum(v * v, axis=-1))
    if np.any(q < -TOL.tangent * scale):
        raise InvalidTangentError(f"tangent vector is timelike (<v,v>_L = {np.min(q):.3e})")
    x, v = np.broadcast_arrays(x, v)
    ws = _to_origin_spatial(x, v)
    theta = np.linalg.norm(ws, axis=-1, keepdims=True)
    small = theta < TOL.small_angle
    safe = np.where(small, 1.0, theta)
    coef = np.where(small, 1.0, np.sinh(safe) / safe)
    return lift(_from_origin_spatial(x, np.cosh(theta), coef * ws))


def geodesic_distance(x, y):
    """arccosh(-<x,y>_L), evaluated stably for nearby points.

    For close points the chordal form 2 asinh(|x - y|_L / 2) is used; it is the
    same function but avoids the sqrt-loss of arccosh near 1.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_same_length(x, y)
    c = np.maximum(-lorentz_inner(x, y), 1.0)
    diff = x - y
    chord = np.sqrt(np.maximum(lorentz_inner(diff, diff), 0.0))
    near = c < 2.0
    return np.where(near, 2.0 * np.arcsinh(0.5 * chord), np.arccosh(c))


def squared_lorentz_distance(x, y):
    """-1 - <x,y>_L, clamped at zero."""
    return np.maximum(-1.0 - lorentz_inner(x, y), 0.0)


def log_map(x, y):
    """Logarithmic map Log_x(y), the inverse of :func:`exp_map`.

    Computed in the frame where x is the origin: there Log is
    asinh(|p|) p / |p| for the spatial block p of the boosted y.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_same_length(x, y)
    x, y = np.broadcast_arrays(x, y)
    p = _to_origin_spatial(x, y)
    r = np.linalg.norm(p, axis=-1, keepdims=True)
    small = r < TOL.small_angle
    coef = np.where(small, 1.0, np.arcsinh(r) / np.where(small, 1.0, r))
    w = coef * p
    xs = x[..., 1:]
    w0 = np.sum(xs * w, axis=-1, keepdims=True)
    return np.concatenate([w0, _from_origin_spatial(x, 0.0, w)], axis=-1)


def to_poincare(x):
    x = np.asarray(x, dtype=float)
    return x[..., 1:] / (1.0 + x[..., :1])


def from_poincare(p):
    p = np.asarray(p, dtype=float)
    r2 = np.sum(p * p, axis=-1, keepdims=True)
    if np.any(r2 >= 1.0):
        raise OutOfDiskError("Poincare coordinates must have norm < 1")
    return lift(2.0 * p / (1.0 - r2))


def lorentz_centroid(points, weights=None):
    """Closed-form minimizer of the weighted squared Lorentzian distance.

    Returns sum_j w_j x_j / |‖sum_j w_j x_j‖_L|.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[0] == 0:
        raise InputError("centroid of an empty set")
    w = np.full(X.shape[0], 1.0 / X.shape[0]) if weights is None else np.asarray(weights, float)
    if w.shape != (X.shape[0],):
        raise DimensionError("weights must have one entry per point")
    if np.any(w < 0) or not np.any(w > 0):
        raise InputError("weights must be nonnegative and not all zero")
    return normalize_timelike(w @ X, what="weighted sum")


def _frechet_objective(mu, X, w):
    return float(w @ geodesic_distance(mu, X) ** 2)


def frechet_mean(points, weights=None, max_iter=None, tol=None):
    """Weighted Frechet (Karcher) mean by Riemannian gradient descent.

    The update direction is sum_i w_i Log_mu(x_i); its fixed point is the mean.
    The step is preconditioned by the average Hessian scale sum_i w_i d_i coth d_i
    (equal to 1 for a tight cluster) and safeguarded by backtracking.

    Raises
    ------
    ConvergenceError
        If the update norm is still above ``tol`` after ``max_iter`` steps;
        the error carries the last iterate.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[0] == 0:
        raise InputError("Frechet mean of an empty set")
    n_pts = X.shape[0]
    w = np.full(n_pts, 1.0 / n_pts) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n_pts,):
        raise DimensionError("weights must have one entry per point")
    if np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=1e-9):
        raise InputError("weights must be nonnegative and sum to 1")
    max_iter = TOL.frechet_max_iter if max_iter is None else max_iter
    tol = TOL.frechet_step if tol is None else tol

    mu = lorentz_centroid(X, w)
    f = _frechet_objective(mu, X, w)
    for it in range(max_iter):
        g = w @ log_map(mu, X)
        gnorm = float(np.sqrt(max(lorentz_inner(g, g), 0.0)))
        if gnorm < tol:
            return mu
        d = geodesic_distance(mu, X)
        curv = np.where(d < 1e-8, 1.0, d / np.tanh(np.maximum(d, 1e-300)))
        step = 1.0 / max(1.0, float(w @ curv))
        while True:
            cand = exp_map(mu, step * g)
            fc = _frechet_objective(cand, X, w)
            slack = 1e-13 * max(1.0, abs(f))  # decreases below this are invisible in float64
            if fc <= f - 1e-4 * step * gnorm**2 + slack or step < 1e-12:
                break
            step *= 0.5
        mu, f = cand, fc
    raise ConvergenceError(f"Frechet mean did not converge (update norm {gnorm:.3e})", last=mu,
                           iterations=it + 1)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_wrapped_normal(mean, sigma: float, count: int, seed=None) -> np.ndarray:
    """Draw ``count`` points from the wrapped normal centred at ``mean``.

    A Gaussian N(0, sigma^2 I_n) in the tangent space at the origin is carried
    to ``mean`` by the boost of :func:`nestedhyp.group.origin_boost` and then
    pushed through the exponential map.
    """
    from .group import origin_boost

    mean = check_point(mean, what="mean")
    if not sigma > 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    n = mean.shape[-1] - 1
    rng = _rng(seed)
    v = np.zeros((count, n + 1))
    v[:, 1:] = sigma * rng.standard_normal((count, n))
    v = v @ origin_boost(mean).T
    return exp_map(mean, v)
