"""Nested hyperboloids: codimension-one embeddings L^m -> L^{m+1} and their stacks.

A :class:`NestingLevel` holds a Lorentz matrix ``Lambda`` of size ``m + 2``
split as ``[Lambda_tilde | v]`` and an offset ``r``. The embedding is

    iota(x) = cosh(r) Lambda_tilde x + sinh(r) v

and the matching projection is J_m Lambda_tilde^T J_{m+1} x, renormalized.
The image of ``iota`` is the slice {y in L^{m+1} : <y, v>_L = sinh(r)}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import TOL
from .errors import DegenerateInputError, DimensionError, InputError
from .group import check_lorentz, compose, lorentz_inverse
from .lorentz import geodesic_distance, lorentz_inner, minkowski_form


@dataclass(frozen=True)
class NestingLevel:
    """Parameters of one embedding L^m -> L^{m+1}."""

    Lambda: np.ndarray
    r: float = 0.0

    def __post_init__(self):
        L = np.array(self.Lambda, dtype=float)
        L.setflags(write=False)
        object.__setattr__(self, "Lambda", L)
        object.__setattr__(self, "r", float(self.r))
        if L.shape[0] < 2:
            raise DimensionError("Lambda must be at least 2x2 (L^0 -> L^1)")
        check_lorentz(L)

    @classmethod
    def identity(cls, m: int, r: float = 0.0) -> "NestingLevel":
        return cls(np.eye(m + 2), r)

    @classmethod
    def from_factors(cls, P, alpha, Q, r=0.0) -> "NestingLevel":
        return cls(compose(P, alpha, Q), r)

    @property
    def inner_dim(self) -> int:
        """m, the dimension of the embedded hyperboloid."""
        return self.Lambda.shape[0] - 2

    @property
    def outer_dim(self) -> int:
        return self.Lambda.shape[0] - 1

    @property
    def frame(self) -> np.ndarray:
        """Lambda_tilde, the first m + 1 columns."""
        return self.Lambda[:, :-1]

    @property
    def normal(self) -> np.ndarray:
        """v, the last column; a unit spacelike vector."""
        return self.Lambda[:, -1]


def _dim(x, expected, what):
    if x.shape[-1] != expected + 1:
        raise DimensionError(f"{what} must live in L^{expected} "
                             f"({expected + 1} coordinates), got {x.shape[-1]}")


def embed(level: NestingLevel, x):
    """iota_m(x) = cosh(r) Lambda_tilde x + sinh(r) v."""
    x = np.asarray(x, dtype=float)
    _dim(x, level.inner_dim, "x")
    return np.cosh(level.r) * (x @ level.frame.T) + np.sinh(level.r) * level.normal


def project(level: NestingLevel, x):
    """pi_{m+1}(x): Lorentz-orthogonal coordinates in the frame, renormalized."""
    x = np.asarray(x, dtype=float)
    _dim(x, level.outer_dim, "x")
    m = level.inner_dim
    y = (x @ minkowski_form(m + 1)) @ level.frame @ minkowski_form(m)
    q = lorentz_inner(y, y)
    if np.any(q >= -TOL.degenerate):
        raise DegenerateInputError("projection is not timelike; input is not a valid point")
    return y / np.sqrt(-q)[..., None]


def reconstruct(level: NestingLevel, x):
    """Closest point of the nested image: embed(project(x))."""
    return embed(level, project(level, x))


def conjugated_action(level: NestingLevel, R, y):
    """Apply Lambda diag(R, 1) Lambda^{-1} to points of L^{m+1}.

    ``R`` acts on L^m; this realizes the equivariance identity
    embed(R x) == conjugated_action(R, embed(x)).
    """
    R = check_lorentz(R)
    m = level.inner_dim
    if R.shape[0] != m + 1:
        raise DimensionError(f"R must act on L^{m}, got size {R.shape[0]}")
    y = np.asarray(y, dtype=float)
    _dim(y, m + 1, "y")
    return y @ conjugation_matrix(level, R).T


def conjugation_matrix(level: NestingLevel, R):
    m = level.inner_dim
    blk = np.eye(m + 2)
    blk[: m + 1, : m + 1] = R
    return level.Lambda @ blk @ lorentz_inverse(level.Lambda)


def distance_to_image(level: NestingLevel, x):
    """Geodesic distance from x to the nested image, |asinh(<x, v>_L) - r|.

    Equal to d(x, reconstruct(level, x)) but cheaper and free of the
    cancellation in arccosh near zero.
    """
    x = np.asarray(x, dtype=float)
    _dim(x, level.outer_dim, "x")
    return np.abs(np.arcsinh(lorentz_inner(x, level.normal)) - level.r)


@dataclass(frozen=True)
class NestingStack:
    """Levels ordered from the outermost (L^n -> L^{n-1}) to the innermost."""

    levels: tuple = field(default_factory=tuple)

    def __post_init__(self):
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise InputError("a stack needs at least one level")
        for outer, inner in zip(levels, levels[1:]):
            if inner.outer_dim != outer.inner_dim:
                raise DimensionError(
                    f"adjacent levels must differ by one dimension: L^{outer.inner_dim} "
                    f"vs L^{inner.outer_dim}")

    @classmethod
    def identity(cls, n: int, m: int) -> "NestingStack":
        if not n > m >= 0:
            raise DimensionError(f"need n > m >= 0, got n={n}, m={m}")
        return cls(tuple(NestingLevel.identity(k - 1) for k in range(n, m, -1)))

    @property
    def ambient_dim(self) -> int:
        return self.levels[0].outer_dim

    @property
    def target_dim(self) -> int:
        return self.levels[-1].inner_dim

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)


def _as_stack(stack):
    if isinstance(stack, NestingLevel):
        return NestingStack((stack,))
    if isinstance(stack, NestingStack):
        return stack
    return NestingStack(tuple(stack))


def stack_project(stack, x):
    """Project L^n -> L^m through every level, outermost first."""
    stack = _as_stack(stack)
    for level in stack.levels:
        x = project(level, x)
    return x


def stack_embed(stack, z):
    """Embed L^m -> L^n through every level, innermost first."""
    stack = _as_stack(stack)
    for level in reversed(stack.levels):
        z = embed(level, z)
    return z


def stack_reconstruct(stack, x):
    return stack_embed(stack, stack_project(stack, x))


def stack_frame(stack) -> np.ndarray:
    """M = Lambda_tilde_n ... Lambda_tilde_{m+1}, shape (n+1, m+1)."""
    stack = _as_stack(stack)
    M = np.eye(stack.ambient_dim + 1)
    for level in stack.levels:
        M = M @ level.frame
    return M


def stack_project_closed_form(stack, x):
    """J_m M^T J_n x / |‖J_m M^T J_n x‖_L|, the one-shot form of stack_project."""
    stack = _as_stack(stack)
    M = stack_frame(stack)
    y = (np.asarray(x, float) @ minkowski_form(stack.ambient_dim)) @ M @ minkowski_form(
        stack.target_dim)
    q = lorentz_inner(y, y)
    if np.any(q >= -TOL.degenerate):
        raise DegenerateInputError("closed-form projection is not timelike")
    return y / np.sqrt(-q)[..., None]


def reconstruction_errors(stack, data) -> np.ndarray:
    """Per-point geodesic distance between x and its stack reconstruction."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    return geodesic_distance(data, stack_reconstruct(stack, data))


def reconstruction_loss(stack, data) -> float:
    """Mean squared geodesic distance between points and their reconstructions."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] == 0:
        raise InputError("reconstruction loss of empty data")
    err = reconstruction_errors(stack, data)
    return float(np.mean(err**2))


def transform_stack(stack, A) -> NestingStack:
    """Move a stack by an isometry of the ambient space (outermost Lambda <- A Lambda)."""
    stack = _as_stack(stack)
    first = stack.levels[0]
    moved = NestingLevel(np.asarray(A, float) @ first.Lambda, first.r)
    return NestingStack((moved,) + stack.levels[1:])


def embedded_curve(stack, ts: Sequence[float]):
    """Image of the geodesic lift([t]) of L^1 under a stack ending in L^1."""
    from .lorentz import lift

    stack = _as_stack(stack)
    if stack.target_dim != 1:
        raise DimensionError("curve sampling needs a stack ending in L^1")
    z = lift(np.asarray(ts, dtype=float)[:, None])
    return stack_embed(stack, z)
