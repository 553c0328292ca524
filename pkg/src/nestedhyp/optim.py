"""First-order Riemannian optimization on SO(k), row-Stiefel frames and R^d.

``minimize`` runs block-coordinate descent: it cycles through the parameters
and takes one Armijo line-search step per parameter along a QR retraction.
Objectives and gradients receive plain numpy arrays (one per parameter).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import DimensionError, InputError, OptimizationError, RetractionError

KINDS = ("rotation", "stiefel", "euclidean")


@dataclass(frozen=True)
class ParameterPoint:
    """A point on one of the parameter manifolds.

    ``rotation``: square matrix in SO(k). ``stiefel``: m x n matrix with
    orthonormal rows (m <= n). ``euclidean``: unconstrained array, including
    0-d scalars.
    """

    kind: str
    value: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown parameter kind {self.kind!r}")
        v = np.array(self.value, dtype=float)
        if self.kind == "rotation" and (v.ndim != 2 or v.shape[0] != v.shape[1]):
            raise DimensionError("rotation parameters must be square")
        if self.kind == "stiefel" and (v.ndim != 2 or v.shape[0] > v.shape[1]):
            raise DimensionError("stiefel parameters need shape (m, n) with m <= n")
        v.setflags(write=False)
        object.__setattr__(self, "value", v)

    @classmethod
    def rotation(cls, R, name=""):
        return cls("rotation", R, name)

    @classmethod
    def stiefel(cls, X, name=""):
        return cls("stiefel", X, name)

    @classmethod
    def scalar(cls, x, name=""):
        return cls("euclidean", float(x), name)

    @classmethod
    def euclidean(cls, x, name=""):
        return cls("euclidean", x, name)

    def with_value(self, value):
        return replace(self, value=value)

    def residual(self) -> float:
        """Distance to the manifold (0 for euclidean)."""
        v = self.value
        if self.kind == "rotation":
            orth = np.max(np.abs(v.T @ v - np.eye(v.shape[0])))
            return float(max(orth, abs(np.linalg.det(v) - 1.0)))
        if self.kind == "stiefel":
            return float(np.max(np.abs(v @ v.T - np.eye(v.shape[0]))))
        return 0.0


def _sym(A):
    return 0.5 * (A + A.T)


def _skew(A):
    return 0.5 * (A - A.T)


def tangent_project(p: ParameterPoint, G) -> np.ndarray:
    """Riemannian gradient: orthogonal projection of ``G`` onto T_p."""
    G = np.asarray(G, dtype=float)
    X = p.value
    if G.shape != X.shape:
        raise DimensionError(f"gradient shape {G.shape} does not match parameter {X.shape}")
    if p.kind == "rotation":
        return X @ _skew(X.T @ G)
    if p.kind == "stiefel":
        return G - _sym(G @ X.T) @ X
    return G


def _qf_rows(M):
    """Orthonormal-row factor of M (m <= n) with positive-diagonal convention."""
    Q, R = np.linalg.qr(M.T)
    d = np.diag(R)
    if np.any(np.abs(d) < 1e-14):
        raise RetractionError("rank-deficient matrix in QR retraction")
    return (Q * np.sign(d)).T


def retract(p: ParameterPoint, T, step: float = 1.0) -> ParameterPoint:
    """QR retraction R_p(step * T)."""
    T = np.asarray(T, dtype=float)
    if T.shape != p.value.shape:
        raise DimensionError("tangent shape does not match parameter")
    M = p.value + step * T
    if p.kind == "euclidean":
        return p.with_value(M)
    if step == 0.0:
        return p
    if p.kind == "rotation":
        Q, R = np.linalg.qr(M)
        d = np.diag(R)
        if np.any(np.abs(d) < 1e-14):
            raise RetractionError("rank-deficient matrix in QR retraction")
        return p.with_value(Q * np.sign(d))
    return p.with_value(_qf_rows(M))


def inner(A, B) -> float:
    return float(np.sum(np.asarray(A) * np.asarray(B)))


@dataclass
class OptimizerConfig:
    step_size: float = 1.0
    max_iter: int = 500
    grad_tol: float = 1e-8
    contraction: float = 0.5
    sufficient_decrease: float = 1e-4
    restarts: int = 1
    seed: int = 0
    fd_step: float = 1e-6
    mode: str = "block"  # or "joint"
    max_backtracks: int = 60
    max_step: float = 1e6
    f_tol: float = 0.0  # stop when a full cycle lowers the objective by less than f_tol * |f|

    def __post_init__(self):
        if not (self.step_size > 0 and self.max_iter > 0 and self.grad_tol > 0):
            raise InputError("step_size, max_iter and grad_tol must be positive")
        if not 0 < self.contraction < 1:
            raise InputError("contraction must lie in (0, 1)")
        if not 0 < self.sufficient_decrease < 1:
            raise InputError("sufficient_decrease must lie in (0, 1)")
        if self.restarts < 1:
            raise InputError("restarts must be >= 1")
        if self.mode not in ("block", "joint"):
            raise InputError(f"unknown mode {self.mode!r}")


@dataclass
class TraceRow:
    iteration: int
    objective: float
    grad_norms: List[float]


@dataclass
class OptimizeResult:
    params: List[ParameterPoint]
    value: float
    trace: List[TraceRow]
    converged: bool
    restart_values: List[float] = field(default_factory=list)

    def trace_csv(self) -> str:
        return trace_to_csv(self.trace, [p.name or f"p{i}" for i, p in enumerate(self.params)])


def trace_to_csv(trace: Sequence[TraceRow], names: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "objective"] + [f"grad_norm_{n}" for n in names])
    for row in trace:
        w.writerow([row.iteration, repr(float(row.objective))] + [repr(float(g)) for g in row.grad_norms])
    return buf.getvalue()


def fd_gradient(objective, values, index, h=1e-6) -> np.ndarray:
    """Central finite-difference ambient gradient wrt ``values[index]``."""
    values = [np.array(v, dtype=float) for v in values]
    base = values[index]
    G = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = base[idx]
        base[idx] = orig + h
        fp = objective(values)
        base[idx] = orig - h
        fm = objective(values)
        base[idx] = orig
        G[idx] = (fp - fm) / (2 * h)
    return G


def _values(params):
    return [p.value for p in params]


class _Problem:
    def __init__(self, objective, gradient, config):
        self.objective = objective
        self.gradient = gradient
        self.config = config

    def f(self, params):
        return float(self.objective(_values(params)))

    def grads(self, params, blocks=None):
        """Ambient gradients for the requested blocks (all by default)."""
        blocks = range(len(params)) if blocks is None else blocks
        if self.gradient is not None:
            full = self.gradient(_values(params))
            return {i: np.asarray(full[i], dtype=float).reshape(params[i].value.shape)
                    for i in blocks}
        return {i: fd_gradient(self.objective, _values(params), i, self.config.fd_step)
                for i in blocks}


def _line_search(prob, params, f0, idxs, directions, t0):
    """Armijo backtracking along the retraction; returns (params, f, t) or None."""
    cfg = prob.config
    slope = sum(inner(d, d) for d in directions.values())
    t = t0
    for _ in range(cfg.max_backtracks):
        cand = list(params)
        try:
            for i in idxs:
                cand[i] = retract(params[i], -directions[i], t)
            fc = prob.f(cand)
        except RetractionError:
            fc = np.inf
        if np.isfinite(fc) and fc <= f0 - cfg.sufficient_decrease * t * slope:
            return cand, fc, t
        t *= cfg.contraction
    return None


def _run(prob, params, callback=None):
    cfg = prob.config
    params = list(params)
    f = prob.f(params)
    trace: List[TraceRow] = []
    if not np.isfinite(f):
        raise OptimizationError("objective is not finite at the starting point", trace=trace)
    steps = [cfg.step_size] * len(params)
    norms = [np.inf] * len(params)
    converged = False
    for it in range(cfg.max_iter):
        progressed = False
        if cfg.mode == "joint":
            G = prob.grads(params)
            dirs = {i: tangent_project(params[i], G[i]) for i in G}
            norms = [float(np.linalg.norm(dirs[i])) for i in range(len(params))]
            if max(norms) < cfg.grad_tol:
                converged = True
                trace.append(TraceRow(it, f, norms))
                break
            res = _line_search(prob, params, f, list(dirs), dirs, min(2 * steps[0], cfg.max_step))
            if res is not None:
                params, f, steps[0] = res
                progressed = True
        else:
            for i in range(len(params)):
                g = tangent_project(params[i], prob.grads(params, [i])[i])
                norms[i] = float(np.linalg.norm(g))
                if norms[i] < cfg.grad_tol:
                    continue
                res = _line_search(prob, params, f, [i], {i: g},
                                   min(2 * steps[i], cfg.max_step))
                if res is not None:
                    params, f, steps[i] = res
                    progressed = True
            if max(norms) < cfg.grad_tol:
                converged = True
        trace.append(TraceRow(it, f, list(norms)))
        if callback is not None:
            callback(it, params, f)
        if converged or not progressed:
            break
        if cfg.f_tol > 0 and len(trace) > 1 and trace[-2].objective - f <= cfg.f_tol * abs(f):
            break
    return params, f, trace, converged


def minimize(objective: Callable, params: Sequence[ParameterPoint], config: Optional[OptimizerConfig] = None,
             gradient: Optional[Callable] = None, init: Optional[Callable] = None,
             callback: Optional[Callable] = None) -> OptimizeResult:
    """Minimize ``objective(values)`` over a list of manifold parameters.

    Parameters
    ----------
    objective : callable
        Maps a list of arrays (one per parameter) to a float.
    params : list of ParameterPoint
        Starting point of the first run.
    config : OptimizerConfig
    gradient : callable, optional
        Returns the list of ambient (Euclidean) gradients. Central finite
        differences are used when omitted.
    init : callable, optional
        ``init(rng) -> list of ParameterPoint`` producing starting points for
        restarts ``1 .. config.restarts - 1``.
    callback : callable, optional
        Called as ``callback(iteration, params, value)`` after every cycle.

    Returns
    -------
    OptimizeResult
        The best run over all restarts.
    """
    cfg = config or OptimizerConfig()
    prob = _Problem(objective, gradient, cfg)
    rng = np.random.default_rng(cfg.seed)
    best = None
    values = []
    for k in range(cfg.restarts):
        if k == 0:
            start = list(params)
        elif init is not None:
            start = list(init(rng))
        else:
            break
        p, f, trace, conv = _run(prob, start, callback)
        values.append(f)
        if best is None or f < best.value:
            best = OptimizeResult(p, f, trace, conv)
    best.restart_values = values
    return best


@dataclass
class FDReport:
    rel_errors: List[float]
    tol: float

    @property
    def max_rel_error(self) -> float:
        return max(self.rel_errors) if self.rel_errors else 0.0

    @property
    def passed(self) -> bool:
        return all(e < self.tol for e in self.rel_errors)


def fd_check(objective, params: Sequence[ParameterPoint], gradient, tol: float = 1e-6,
             h: float = 1e-6, floor: float = 1e-6) -> FDReport:
    """Compare projected analytic gradients with central differences.

    The relative error of each parameter is |g_a - g_fd| / max(|g_fd|, floor)
    in Frobenius norm, both gradients projected onto the tangent space.
    """
    params = list(params)
    values = _values(params)
    analytic = gradient(values)
    errs = []
    for i, p in enumerate(params):
        ga = tangent_project(p, np.asarray(analytic[i], float).reshape(p.value.shape))
        gf = tangent_project(p, fd_gradient(objective, values, i, h))
        errs.append(float(np.linalg.norm(ga - gf) / max(np.linalg.norm(gf), floor)))
    return FDReport(errs, tol)
