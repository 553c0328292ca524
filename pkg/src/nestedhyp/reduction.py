"""Dimensionality reduction of hyperboloid data: nested hyperboloids and tangent PCA."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import DimensionError, HyperbolicError, InputError, OptimizationError
from .group import (
    adapted_gram_schmidt,
    axis_decompose,
    compose,
    compose_gradients,
    origin_boost,
    random_rotation,
)
from .lorentz import (
    check_point,
    exp_map,
    frechet_mean,
    geodesic_distance,
    lorentz_inner,
    log_map,
    minkowski_form,
    origin,
    sample_wrapped_normal,
)
from .nested import NestingLevel, NestingStack, project, reconstruction_errors
from .optim import OptimizerConfig, ParameterPoint, TraceRow, minimize


@dataclass
class ReductionConfig:
    """Settings for :func:`fit_nh` and the evaluation helpers.

    ``restarts`` counts random initializations per level in addition to the
    identity start and the tangent-PCA seeded start.
    """

    optimizer: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(max_iter=150, grad_tol=1e-7, f_tol=1e-10))
    restarts: int = 2
    seed: int = 0
    joint: bool = True
    joint_optimizer: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(max_iter=50, grad_tol=1e-7, f_tol=1e-10))
    tpca_seed: bool = True
    repeats: int = 1


@dataclass
class TangentPcaModel:
    """Principal directions in the tangent space at the Frechet mean.

    ``frame`` has shape (n + 1, n): all tangent principal directions ordered by
    decreasing variance, Lorentz-orthonormal and Lorentz-orthogonal to
    ``mean``. The first ``target_dim`` columns form the kept basis.
    """

    mean: np.ndarray
    frame: np.ndarray
    variances: np.ndarray
    target_dim: int

    @property
    def ambient_dim(self):
        return self.mean.shape[0] - 1

    @property
    def basis(self):
        return self.frame[:, : self.target_dim]

    def coordinates(self, data):
        V = log_map(self.mean, data)
        return lorentz_inner(V[..., None, :], self.basis.T)

    def reconstruct(self, data):
        c = self.coordinates(data)
        return exp_map(self.mean, c @ self.basis.T)

    def explained_variance_ratio(self):
        return float(np.sum(self.variances[: self.target_dim]) / np.sum(self.variances))


@dataclass
class ReductionResult:
    model: object
    errors: np.ndarray  # per-point geodesic distances
    trace: List[TraceRow] = field(default_factory=list)
    method: str = ""

    @property
    def squared_errors(self):
        return self.errors**2

    @property
    def mean_squared_error(self) -> float:
        return float(np.mean(self.errors**2))


def _check_data(data, m):
    X = check_point(np.atleast_2d(np.asarray(data, dtype=float)), what="data")
    n = X.shape[1] - 1
    if not n > m >= 1:
        raise DimensionError(f"need ambient dimension n > target m >= 1, got n={n}, m={m}")
    if X.shape[0] < 2:
        raise InputError("need at least two data points")
    return X


# ---------------------------------------------------------------------------
# nested hyperboloids


def level_loss(X, normal, r):
    """Single-level reconstruction error, mean_i (asinh <x_i, v>_L - r)^2."""
    return float(np.mean((np.arcsinh(lorentz_inner(X, normal)) - r) ** 2))


def _level_objective(X):
    JX = X @ minkowski_form(X.shape[1] - 1)

    def parts(values):
        P, alpha, Q, r = values
        v = compose(P, float(alpha), Q)[:, -1]
        w = JX @ v
        res = np.arcsinh(w) - float(r)
        return v, w, res

    def objective(values):
        _, _, res = parts(values)
        return float(np.mean(res**2))

    def gradient(values):
        P, alpha, Q, r = values
        _, w, res = parts(values)
        N = X.shape[0]
        gv = (2.0 / N) * ((res / np.sqrt(1.0 + w * w)) @ JX)
        G = np.zeros((X.shape[1], X.shape[1]))
        G[:, -1] = gv
        dP, dalpha, dQ = compose_gradients(P, float(alpha), Q, G)
        dr = -2.0 * float(np.mean(res))
        return [dP, dalpha, dQ, dr]

    return objective, gradient


def _level_params(P, alpha, Q, r):
    return [ParameterPoint.rotation(P, "P"), ParameterPoint.scalar(alpha, "alpha"),
            ParameterPoint.rotation(Q, "Q"), ParameterPoint.scalar(r, "r")]


def _best_offset(X, level_like):
    # optimal r for a fixed normal is the mean signed asinh coordinate
    return float(np.mean(np.arcsinh(lorentz_inner(X, level_like.normal))))


def fit_level(X, starts: Sequence[NestingLevel], config: OptimizerConfig):
    """Fit one codimension-1 level to the cloud ``X`` from each start; keep the best."""
    objective, gradient = _level_objective(X)
    best = None
    for start in starts:
        dec = axis_decompose(start.Lambda)
        params = _level_params(dec.P, dec.alpha, dec.Q, start.r)
        res = minimize(objective, params, config, gradient=gradient)
        if best is None or res.value < best.value:
            best = res
    P, alpha, Q, r = (p.value for p in best.params)
    return NestingLevel.from_factors(P, float(alpha), Q, float(r)), best


def _random_level(n, rng):
    return NestingLevel.from_factors(random_rotation(n, rng), 0.1 * rng.standard_normal(),
                                     random_rotation(n, rng), 0.0)


def tangent_pca_stack(model: TangentPcaModel) -> NestingStack:
    """Stack (r = 0) whose image is the geodesic submanifold spanned by a tPCA model.

    The first level uses the Lorentz frame [mean, principal directions,
    remaining tangent directions by decreasing variance]; later levels are
    identities, each dropping the least-variance remaining coordinate.
    """
    n = model.ambient_dim
    E = adapted_gram_schmidt(np.column_stack([model.mean, model.frame]))
    levels = [NestingLevel(E, 0.0)]
    levels += [NestingLevel.identity(k - 1) for k in range(n - 1, model.target_dim, -1)]
    return NestingStack(tuple(levels))


def fit_nh(data, target_dim: int, config: Optional[ReductionConfig] = None) -> ReductionResult:
    """Fit a nested-hyperboloid stack L^n -> L^m by greedy level-wise descent.

    Each level is fitted by Riemannian block-coordinate descent over
    (P, alpha, Q, r) with Lambda = diag(1,P) boost(alpha) diag(1,Q^T), starting
    from the identity, from the tangent-PCA seeded frame, and from
    ``config.restarts`` random frames. The best greedy stack is compared with
    the tangent-PCA seeded stack itself; a joint refinement of all levels
    (``config.joint``, on by default) runs last.
    """
    cfg = config or ReductionConfig()
    X = _check_data(data, target_dim)
    n = X.shape[1] - 1
    rng = np.random.default_rng(cfg.seed)

    seeded = None
    if cfg.tpca_seed:
        try:
            seeded = tangent_pca_stack(fit_tangent_pca(X, target_dim).model)
        except HyperbolicError:  # seeding is optional; plain starts remain
            seeded = None

    cloud = X
    levels = []
    trace: List[TraceRow] = []
    for depth, k in enumerate(range(n, target_dim, -1)):
        starts = [NestingLevel.identity(k - 1)]
        if seeded is not None and depth == 0:
            starts.append(seeded.levels[0])
        starts += [_random_level(k, rng) for _ in range(cfg.restarts)]
        try:
            level, res = fit_level(cloud, starts, cfg.optimizer)
        except OptimizationError as err:
            err.level = depth
            raise
        # snap r to its exact optimum for the fitted normal
        level = NestingLevel(level.Lambda, _best_offset(cloud, level))
        trace.extend(res.trace)
        levels.append(level)
        cloud = project(level, cloud)
    stack = NestingStack(tuple(levels))

    best_err = reconstruction_errors(stack, X)
    if seeded is not None:
        seeded_err = reconstruction_errors(seeded, X)
        if np.mean(seeded_err**2) < np.mean(best_err**2):
            stack, best_err = seeded, seeded_err
    if cfg.joint:
        stack, joint_trace = refine_joint(stack, X, cfg.joint_optimizer)
        trace.extend(joint_trace)
        best_err = reconstruction_errors(stack, X)
    return ReductionResult(stack, best_err, trace, "nh")


def _stack_params(stack):
    params = []
    for level in stack.levels:
        dec = axis_decompose(level.Lambda)
        params += _level_params(dec.P, dec.alpha, dec.Q, level.r)
    return params


def _build_levels(values):
    out = []
    for i in range(0, len(values), 4):
        P, alpha, Q, r = values[i:i + 4]
        out.append((compose(P, float(alpha), Q), float(r)))
    return out


def _stack_objective(X):
    """Mean squared reconstruction error of a whole stack and its exact gradient.

    Parameters are the concatenated (P, alpha, Q, r) of every level, outermost
    first.
    """
    N = X.shape[0]

    def forward(values):
        levels = _build_levels(values)
        zs, ys = [X], []
        for Lam, _ in levels:
            k = Lam.shape[0] - 1
            y = (zs[-1] @ minkowski_form(k)) @ Lam[:, :-1] @ minkowski_form(k - 1)
            q = -lorentz_inner(y, y)
            if np.any(q <= 0):
                return levels, zs, ys, None
            ys.append(y)
            zs.append(y / np.sqrt(q)[:, None])
        us = [zs[-1]]
        for Lam, r in reversed(levels):
            us.append(np.cosh(r) * us[-1] @ Lam[:, :-1].T + np.sinh(r) * Lam[:, -1])
        us.reverse()  # us[i] lives in the outer space of level i; us[0] is the reconstruction
        return levels, zs, ys, us

    def objective(values):
        *_, us = forward(values)
        if us is None:
            return np.inf
        return float(np.mean(geodesic_distance(X, us[0]) ** 2))

    def gradient(values):
        levels, zs, ys, us = forward(values)
        if us is None:
            raise OptimizationError("stack projection left the hyperboloid")
        d = geodesic_distance(X, us[0])
        ratio = np.where(d < 1e-8, 1.0, d / np.sinh(np.maximum(d, 1e-300)))
        JX = X @ minkowski_form(X.shape[1] - 1)
        g = -(2.0 / N) * ratio[:, None] * JX  # d loss / d reconstruction
        grads_L = [np.zeros_like(Lam) for Lam, _ in levels]
        grads_r = [0.0] * len(levels)
        for i, (Lam, r) in enumerate(levels):  # back through the embeddings
            frame, v = Lam[:, :-1], Lam[:, -1]
            inner_pts = us[i + 1]
            ch, sh = np.cosh(r), np.sinh(r)
            grads_L[i][:, :-1] += ch * g.T @ inner_pts
            grads_L[i][:, -1] += sh * g.sum(axis=0)
            grads_r[i] = float(np.sum(g * (sh * inner_pts @ frame.T + ch * v)))
            g = ch * g @ frame
        for i in range(len(levels) - 1, -1, -1):  # back through the projections
            Lam = levels[i][0]
            k = Lam.shape[0] - 1
            y = ys[i]
            s = np.sqrt(-lorentz_inner(y, y))[:, None]
            Jy = y @ minkowski_form(k - 1)
            gy = g / s + (np.sum(g * y, axis=1, keepdims=True) / s**3) * Jy
            Jk, Jk1 = minkowski_form(k), minkowski_form(k - 1)
            grads_L[i][:, :-1] += (zs[i] @ Jk).T @ (gy @ Jk1)
            g = gy @ Jk1 @ Lam[:, :-1].T @ Jk
        out = []
        for i in range(len(levels)):
            P, alpha, Q, _ = values[4 * i: 4 * i + 4]
            dP, dalpha, dQ = compose_gradients(P, float(alpha), Q, grads_L[i])
            out += [dP, dalpha, dQ, grads_r[i]]
        return out

    return objective, gradient


def refine_joint(stack: NestingStack, X, config: OptimizerConfig):
    """Refine every level of a stack at once against the full reconstruction loss."""
    objective, gradient = _stack_objective(X)
    res = minimize(objective, _stack_params(stack), config, gradient=gradient)
    levels = tuple(NestingLevel(Lam, r) for Lam, r in _build_levels([p.value for p in res.params]))
    return NestingStack(levels), res.trace


# ---------------------------------------------------------------------------
# tangent PCA


def fit_tangent_pca(data, target_dim: int) -> ReductionResult:
    """PCA of log-mapped data in the tangent space at the Frechet mean."""
    X = _check_data(data, target_dim)
    mu = frechet_mean(X)
    B = origin_boost(mu)[:, 1:]  # Lorentz-orthonormal basis of T_mu
    V = log_map(mu, X)
    coords = lorentz_inner(V[:, None, :], B.T)
    cov = coords.T @ coords / X.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    model = TangentPcaModel(mu, B @ vecs, np.maximum(vals, 0.0), target_dim)
    errors = geodesic_distance(X, model.reconstruct(X))
    return ReductionResult(model, errors, [], "tpca")


# ---------------------------------------------------------------------------
# evaluation


def reconstruct(model, data):
    if isinstance(model, TangentPcaModel):
        return model.reconstruct(data)
    from .nested import stack_reconstruct

    return stack_reconstruct(model, data)


def evaluate(model, data) -> ReductionResult:
    """Per-point errors of an already fitted model."""
    X = check_point(np.atleast_2d(np.asarray(data, dtype=float)), what="data")
    dim = model.ambient_dim if isinstance(model, (TangentPcaModel, NestingStack)) else None
    if dim is not None and X.shape[1] != dim + 1:
        raise DimensionError(f"model expects L^{dim} data, got {X.shape[1] - 1}")
    if isinstance(model, TangentPcaModel):
        return ReductionResult(model, geodesic_distance(X, model.reconstruct(X)), [], "tpca")
    return ReductionResult(model, reconstruction_errors(model, X), [], "nh")


def fit(method: str, data, target_dim: int, config: Optional[ReductionConfig] = None):
    if method == "nh":
        return fit_nh(data, target_dim, config)
    if method == "tpca":
        return fit_tangent_pca(data, target_dim)
    raise InputError(f"unknown method {method!r} (expected 'nh' or 'tpca')")


@dataclass
class EvaluationSummary:
    method: str
    target_dim: int
    mean_error: float
    std_error: float
    values: List[float]
    seconds: float
    results: List[ReductionResult]


def evaluate_method(method, data, target_dim, config: Optional[ReductionConfig] = None,
                    repeats: Optional[int] = None) -> EvaluationSummary:
    """Refit ``repeats`` times with seeds ``seed, seed+1, ...``; mean and std of the MSE."""
    cfg = config or ReductionConfig()
    repeats = cfg.repeats if repeats is None else repeats
    results = []
    t0 = time.perf_counter()
    for k in range(repeats):
        results.append(fit(method, data, target_dim, replace(cfg, seed=cfg.seed + k)))
    seconds = time.perf_counter() - t0
    values = [r.mean_squared_error for r in results]
    return EvaluationSummary(method, target_dim, float(np.mean(values)), float(np.std(values)),
                             values, seconds, results)


SWEEP_HEADER = ("sigma", "method", "mean_error", "std_error", "seconds")


@dataclass
class SweepRow:
    sigma: float
    method: str
    mean_error: float
    std_error: float
    seconds: float


def variance_sweep(n: int, m: int, sigmas: Sequence[float], count: int, seeds: Sequence[int],
                   config: Optional[ReductionConfig] = None) -> List[SweepRow]:
    """Fit NH and tangent PCA to wrapped-normal samples at each sigma.

    For every seed a fresh sample of ``count`` points centred at the origin of
    L^n is drawn; errors are averaged over seeds.
    """
    cfg = config or ReductionConfig()
    if not n > m >= 1:
        raise DimensionError("need n > m >= 1")
    rows = []
    for sigma in sigmas:
        per = {"nh": [], "tpca": []}
        secs = {"nh": 0.0, "tpca": 0.0}
        for seed in seeds:
            X = sample_wrapped_normal(origin(n), sigma, count, seed)
            for method in ("nh", "tpca"):
                t0 = time.perf_counter()
                res = fit(method, X, m, replace(cfg, seed=seed))
                secs[method] += time.perf_counter() - t0
                per[method].append(res.mean_squared_error)
        for method in ("nh", "tpca"):
            vals = per[method]
            rows.append(SweepRow(float(sigma), method, float(np.mean(vals)), float(np.std(vals)),
                                 secs[method]))
    return rows
