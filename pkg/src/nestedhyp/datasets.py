"""Synthetic data: offset curves, trees, a tree embedder and a two-community graph."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ConvergenceError, InputError, TreeSpecError
from .group import lorentz_inverse, origin_boost, random_rotation, rotation_embed
from .lorentz import (
    check_point,
    exp_map,
    frechet_mean,
    geodesic_distance,
    lift,
    log_map,
    lorentz_inner,
    origin,
    project_tangent,
    sample_wrapped_normal,
)
from .nested import NestingLevel, embed
from .nhgcn import SPLITS, EdgeSamples, GraphData


def _center(X):
    """Move the Frechet mean of ``X`` to the origin; returns (points, mean)."""
    try:
        mu = frechet_mean(X)
    except ConvergenceError as err:  # roundoff floor; the last iterate is accurate enough
        mu = err.last
    return X @ lorentz_inverse(origin_boost(mu)).T, mu


def toy_offset_curve(count: int = 100, sigma: float = 0.02, r0: float = 0.5, seed=0,
                     half_width: float = 1.5):
    """Noisy samples of a hypercycle in L^2 that misses the data's Frechet mean.

    Parameters t_i are evenly spaced in [-half_width, half_width] (symmetric
    about 0) and placed on the curve embed(level, lift([t])) where the level
    has a random rotation frame and offset ``r0``. Wrapped-normal noise of
    scale ``sigma`` is added at each point, then the cloud is moved by an
    isometry so that its Frechet mean is the origin.
    """
    if count < 2:
        raise InputError("count must be >= 2")
    if sigma < 0:
        raise InputError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    level = NestingLevel(rotation_embed(random_rotation(2, rng)), r0)
    t = np.linspace(-half_width, half_width, count)
    X = embed(level, lift(t[:, None]))
    if sigma > 0:
        X = np.array([sample_wrapped_normal(x, sigma, 1, rng)[0] for x in X])
    return _center(X)[0]


# ---------------------------------------------------------------------------
# trees


@dataclass
class TreeSpec:
    """``balanced`` (branching, depth), ``edge-removed`` (base, seed, count) or ``edge-list`` (path)."""

    kind: str = "balanced"
    branching: int = 2
    depth: int = 3
    base: Optional["TreeSpec"] = None
    removal_seed: int = 0
    removal_count: int = 0
    path: Optional[str] = None

    @classmethod
    def balanced(cls, branching, depth):
        return cls("balanced", branching=branching, depth=depth)

    @classmethod
    def edge_removed(cls, base, seed, count):
        return cls("edge-removed", base=base, removal_seed=seed, removal_count=count)

    @classmethod
    def from_edge_list(cls, path):
        return cls("edge-list", path=path)


@dataclass
class Graph:
    num_nodes: int
    edges: np.ndarray  # (E, 2)

    def adjacency(self) -> List[List[int]]:
        adj = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            adj[u].append(int(v))
            adj[v].append(int(u))
        return adj


def bfs_distances(graph: Graph, source: int) -> np.ndarray:
    adj = graph.adjacency()
    dist = np.full(graph.num_nodes, -1, dtype=int)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def all_pairs_distances(graph: Graph) -> np.ndarray:
    return np.stack([bfs_distances(graph, s) for s in range(graph.num_nodes)])


def is_tree(graph: Graph) -> bool:
    if graph.num_nodes == 0 or len(graph.edges) != graph.num_nodes - 1:
        return False
    return bool(np.all(bfs_distances(graph, 0) >= 0))


def _balanced(b, d):
    if b < 1 or d < 0:
        raise TreeSpecError("balanced tree needs branching >= 1 and depth >= 0")
    edges, frontier, nxt = [], [0], 1
    for _ in range(d):
        new = []
        for parent in frontier:
            for _ in range(b):
                edges.append((parent, nxt))
                new.append(nxt)
                nxt += 1
        frontier = new
    return Graph(nxt, np.array(edges, dtype=int).reshape(-1, 2))


def _remove_subtrees(tree: Graph, seed, count):
    """Remove ``count`` random edges whose child side is a leaf or a leaf-parent, with that side.

    Node 0 is the root; surviving nodes are relabeled in increasing order.
    """
    if count < 0:
        raise TreeSpecError("removal count must be nonnegative")
    rng = np.random.default_rng(seed)
    alive = np.ones(tree.num_nodes, dtype=bool)
    dist = bfs_distances(tree, 0)
    parent = {}
    for u, v in tree.edges:
        child, par = (v, u) if dist[v] > dist[u] else (u, v)
        parent[int(child)] = int(par)
    for _ in range(count):
        children = {}
        for c, p in parent.items():
            if alive[c]:
                children.setdefault(p, []).append(c)

        def height(u):
            return 0 if u not in children else 1 + max(height(c) for c in children[u])

        cands = sorted(c for c in parent if alive[c] and height(c) <= 1)
        if not cands:
            raise TreeSpecError("no removable edge left; the tree would lose its root")
        c = cands[rng.integers(len(cands))]
        stack = [c]
        while stack:
            u = stack.pop()
            alive[u] = False
            stack.extend(children.get(u, []))
    keep = np.flatnonzero(alive)
    relabel = {int(u): i for i, u in enumerate(keep)}
    edges = [(relabel[p], relabel[c]) for c, p in sorted(parent.items()) if alive[c]]
    return Graph(len(keep), np.array(edges, dtype=int).reshape(-1, 2))


def build_tree(spec: TreeSpec) -> Graph:
    """Realize a tree specification; the result is always connected and acyclic."""
    if spec.kind == "balanced":
        return _balanced(spec.branching, spec.depth)
    if spec.kind == "edge-removed":
        if spec.base is None:
            raise TreeSpecError("edge-removed spec needs a base spec")
        base = build_tree(spec.base)
        if spec.removal_count == 0:
            return base
        return _remove_subtrees(base, spec.removal_seed, spec.removal_count)
    if spec.kind == "edge-list":
        from .io import read_edges

        edges = read_edges(spec.path)
        n = int(edges.max()) + 1 if edges.size else 1
        g = Graph(n, edges)
        if not is_tree(g):
            raise TreeSpecError(f"{spec.path}: edge list is not a connected tree")
        return g
    raise TreeSpecError(f"unknown tree kind {spec.kind!r}")


@dataclass
class EmbedConfig:
    """Stress-descent settings; ``scale`` is the fixed c multiplying graph distances."""

    scale: float = 1.0
    max_iter: int = 3000
    step: float = 0.1
    tol: float = 1e-9
    init_sigma: float = 0.1
    seed: int = 0


@dataclass
class TreeEmbedding:
    points: np.ndarray
    stress: float
    scale: float
    mean_distortion: float
    history: List[float] = field(default_factory=list)


def _stress(X, D, c):
    iu = np.triu_indices(X.shape[0], 1)
    d = geodesic_distance(X[:, None, :], X[None, :, :])[iu]
    return float(np.sum((d - c * D[iu]) ** 2))


def _distortion(X, D, c):
    iu = np.triu_indices(X.shape[0], 1)
    d = geodesic_distance(X[:, None, :], X[None, :, :])[iu]
    return float(np.mean(np.abs(d - c * D[iu]) / (c * D[iu])))


def embed_tree(graph: Graph, dim: int, config: Optional[EmbedConfig] = None) -> TreeEmbedding:
    """Place the nodes in L^dim so geodesic distances match c times graph distances.

    Minimizes the stress sum_{u<v} (d(x_u, x_v) - c d_G(u, v))^2 by Riemannian
    gradient descent on the product of hyperboloids: the Euclidean gradient of
    every node is projected to its tangent space and the node moves along the
    exponential map. The step is halved whenever the stress would increase.
    """
    cfg = config or EmbedConfig()
    if dim < 1:
        raise InputError("dimension must be >= 1")
    if not cfg.scale > 0:
        raise InputError("scale must be positive")
    D = all_pairs_distances(graph).astype(float)
    if np.any(D < 0):
        raise InputError("graph is not connected")
    N = graph.num_nodes
    if N == 1:
        return TreeEmbedding(origin(dim)[None, :], 0.0, cfg.scale, 0.0, [0.0])
    rng = np.random.default_rng(cfg.seed)
    X = sample_wrapped_normal(origin(dim), cfg.init_sigma, N, rng)
    c = cfg.scale
    f = _stress(X, D, c)
    history = [f]
    step = cfg.step
    target = c * D
    for _ in range(cfg.max_iter):
        # d/dx_u of (d_uv - t_uv)^2 along the manifold is -2 (d_uv - t_uv) Log_{x_u}(x_v) / d_uv
        L = log_map(X[:, None, :], X[None, :, :])
        d = geodesic_distance(X[:, None, :], X[None, :, :])
        w = np.where(d > 0, (d - target) / np.where(d > 0, d, 1.0), 0.0)
        np.fill_diagonal(w, 0.0)
        diff = -2.0 * np.einsum("uv,uvk->uk", w, L)
        gnorm = float(np.sqrt(np.sum(lorentz_inner(diff, diff))))
        if gnorm < cfg.tol:
            break
        while step > 1e-12:
            cand = exp_map(X, -step * project_tangent(X, diff))
            fc = _stress(cand, D, c)
            if fc < f:
                break
            step *= 0.5
        else:
            break
        improvement = f - fc
        X, f = cand, fc
        history.append(f)
        step *= 1.5
        if improvement < cfg.tol * f:
            break
    X = check_point(X, tol=1e-8, what="embedding")
    return TreeEmbedding(X, f, c, _distortion(X, D, c), history)


# ---------------------------------------------------------------------------
# two-community graph


def _split_labels(count, rng, fractions=(0.6, 0.2, 0.2)):
    order = rng.permutation(count)
    n_train = int(round(fractions[0] * count))
    n_val = int(round(fractions[1] * count))
    split = np.empty(count, dtype="<U5")
    split[order[:n_train]] = "train"
    split[order[n_train:n_train + n_val]] = "val"
    split[order[n_train + n_val:]] = "test"
    return split


def two_community_graph(size: int = 40, p_in: float = 0.3, p_out: float = 0.02,
                        noise: float = 0.5, seed=0) -> GraphData:
    """Two-block stochastic block model with one-hot-plus-noise features.

    Nodes and positive edges are each split 60/20/20 into train/val/test. Each
    positive edge gets one negative partner, a uniformly drawn non-edge
    (without repetition) assigned to the same split.
    """
    if not 0 <= p_out < p_in <= 1:
        raise InputError("need 0 <= p_out < p_in <= 1")
    if size < 2:
        raise InputError("size must be >= 2")
    rng = np.random.default_rng(seed)
    N = 2 * size
    labels = np.repeat([0, 1], size)
    iu, ju = np.triu_indices(N, 1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    is_edge = rng.random(iu.shape[0]) < prob
    edges = np.column_stack([iu[is_edge], ju[is_edge]])
    features = np.eye(2)[labels] + noise * rng.standard_normal((N, 2))
    node_split = _split_labels(N, rng)

    E = edges.shape[0]
    pos_split = _split_labels(E, rng)
    non_edges = np.column_stack([iu[~is_edge], ju[~is_edge]])
    if non_edges.shape[0] < E:
        raise InputError("graph too dense to draw one negative per positive edge")
    neg = non_edges[rng.choice(non_edges.shape[0], size=E, replace=False)]
    samples = EdgeSamples(np.vstack([edges, neg]),
                          np.concatenate([np.ones(E, dtype=int), np.zeros(E, dtype=int)]),
                          np.concatenate([pos_split, pos_split]))
    return GraphData(N, edges, features, labels, node_split, samples)


__all__ = [
    "Graph",
    "TreeSpec",
    "EmbedConfig",
    "TreeEmbedding",
    "toy_offset_curve",
    "build_tree",
    "embed_tree",
    "two_community_graph",
    "bfs_distances",
    "all_pairs_distances",
    "is_tree",
    "SPLITS",
]
