"""Nested hyperbolic graph convolution on the hyperboloid.

Each layer maps node representations in L^n to L^m by

    x -> relu_0( centroid_{j in N(i) + i} ( W x_j / |W x_j|_L ) )

where W = diag(1, P_tilde) boost(alpha) diag(1, Q^T) with P_tilde an m x n
frame with orthonormal rows, so W J_n W^T = J_m holds by construction.
Gradients are computed by hand; the network is small enough that dense
numpy is the fastest option.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.stats import rankdata

from .errors import DimensionError, InputError, OptimizationError, TrainingError, UndefinedMetricError
from .group import compose, compose_gradients, random_rotation
from .lorentz import lorentz_inner, minkowski_form, point_residual, squared_lorentz_distance
from .optim import OptimizerConfig, ParameterPoint, minimize

SPLITS = ("train", "val", "test")


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class NHLayerParams:
    """Factors of one constrained weight matrix W of shape (m + 1, n + 1)."""

    P_tilde: np.ndarray
    alpha: float
    Q: np.ndarray

    def __post_init__(self):
        P = np.array(self.P_tilde, dtype=float, ndmin=2)
        Q = np.array(self.Q, dtype=float, ndmin=2)
        if P.shape[0] > P.shape[1] or Q.shape != (P.shape[1], P.shape[1]):
            raise DimensionError(f"need P_tilde (m, n) with m <= n and Q (n, n); got {P.shape}, {Q.shape}")
        P.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "P_tilde", P)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def in_dim(self) -> int:
        return self.Q.shape[0]

    @property
    def out_dim(self) -> int:
        return self.P_tilde.shape[0]

    @property
    def W(self) -> np.ndarray:
        return compose(self.P_tilde, self.alpha, self.Q)

    def constraint_residual(self) -> float:
        """max |W J_n W^T - J_m|."""
        W = self.W
        return float(np.max(np.abs(W @ minkowski_form(self.in_dim) @ W.T
                                   - minkowski_form(self.out_dim))))

    @classmethod
    def random(cls, n: int, m: int, rng, alpha_scale: float = 0.1) -> "NHLayerParams":
        if not 1 <= m <= n:
            raise DimensionError(f"layer needs 1 <= m <= n, got n={n}, m={m}")
        P = random_rotation(n, rng)[:m]
        return cls(P, alpha_scale * rng.standard_normal(), random_rotation(n, rng))


@dataclass
class EdgeSamples:
    """Positive and negative node pairs for link prediction."""

    pairs: np.ndarray  # (K, 2) int
    labels: np.ndarray  # (K,) in {0, 1}
    split: np.ndarray  # (K,) strings in SPLITS

    def select(self, name):
        mask = self.split == name
        return self.pairs[mask], self.labels[mask]


@dataclass
class GraphData:
    """Undirected graph with node features and optional labels and splits."""

    num_nodes: int
    edges: np.ndarray  # (E, 2) int, each undirected edge once
    features: np.ndarray  # (N, d)
    labels: Optional[np.ndarray] = None
    node_split: Optional[np.ndarray] = None  # (N,) strings in SPLITS
    edge_samples: Optional[EdgeSamples] = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        N = int(self.num_nodes)
        if self.features.shape[0] != N:
            raise DimensionError(f"features have {self.features.shape[0]} rows for {N} nodes")
        if not np.all(np.isfinite(self.features)):
            raise InputError("features must be finite")
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= N):
            raise InputError("edge endpoint out of range")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (N,):
                raise DimensionError("labels need one entry per node")
        if self.node_split is not None:
            self.node_split = np.asarray(self.node_split, dtype=str)
            if self.node_split.shape != (N,) or not np.all(np.isin(self.node_split, SPLITS)):
                raise InputError("node_split needs one of train/val/test per node")
        if self.edge_samples is not None:
            es = self.edge_samples
            if es.pairs.size and (es.pairs.min() < 0 or es.pairs.max() >= N):
                raise InputError("edge sample endpoint out of range")

    def node_mask(self, name):
        if self.node_split is None:
            raise InputError("graph has no node splits")
        return self.node_split == name


@dataclass(frozen=True)
class DecoderParams:
    """Fermi-Dirac link head (r_fd, t_fd) and a tangent-space linear class head."""

    r_fd: float = 2.0
    t_fd: float = 1.0
    weight: Optional[np.ndarray] = None  # (classes, n_L)
    bias: Optional[np.ndarray] = None  # (classes,)

    def __post_init__(self):
        if not self.t_fd > 0:
            raise InputError("t_fd must be positive")


# ---------------------------------------------------------------------------
# building blocks


def _normalize(Y):
    s = np.sqrt(-lorentz_inner(Y, Y))
    return Y / s[..., None], s


def _normalize_backward(g, Y, s):
    # d(Y/s): g/s + (g . Y) J Y / s^3, with s = sqrt(-<Y,Y>_L)
    JY = Y.copy()
    JY[..., 0] = -JY[..., 0]
    return g / s[..., None] + (np.sum(g * Y, axis=-1) / s**3)[..., None] * JY


def _log0_coef(rho):
    """a(rho) = asinh(rho)/rho and b(rho) = a'(rho)/rho, with series near 0."""
    small = rho < 1e-4
    r = np.where(small, 1.0, rho)
    a = np.where(small, 1.0 - rho**2 / 6.0, np.arcsinh(r) / r)
    b = np.where(small, -1.0 / 3.0 + 0.3 * rho**2, (r / np.sqrt(1.0 + r * r) - np.arcsinh(r)) / r**3)
    return a, b


def _exp0_coef(phi):
    """c(phi) = sinh(phi)/phi and e(phi) = c'(phi)/phi, with series near 0."""
    small = phi < 1e-4
    p = np.where(small, 1.0, phi)
    c = np.where(small, 1.0 + phi**2 / 6.0, np.sinh(p) / p)
    e = np.where(small, 1.0 / 3.0 + phi**2 / 30.0, (p * np.cosh(p) - np.sinh(p)) / p**3)
    return c, e


def log0(x):
    """Spatial coordinates of Log_origin(x): asinh(|x_s|) x_s / |x_s|."""
    xs = np.asarray(x, dtype=float)[..., 1:]
    a, _ = _log0_coef(np.linalg.norm(xs, axis=-1))
    return a[..., None] * xs


def exp0(u):
    """Exp_origin([0, u]) = [cosh|u|, sinh|u| u/|u|]."""
    u = np.asarray(u, dtype=float)
    phi = np.linalg.norm(u, axis=-1)
    c, _ = _exp0_coef(phi)
    return np.concatenate([np.cosh(phi)[..., None], c[..., None] * u], axis=-1)


def lift_features(features):
    """Euclidean feature rows -> points of L^d through the exponential map at the origin."""
    F = np.asarray(features, dtype=float)
    if not np.all(np.isfinite(F)):
        raise InputError("features must be finite")
    return exp0(F)


def feature_transform(params: NHLayerParams, x):
    """W x / sqrt(-<Wx, Wx>_L), a point of L^m."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.in_dim + 1:
        raise DimensionError(f"layer expects L^{params.in_dim} input, got {x.shape[-1] - 1}")
    Y = x @ params.W.T
    q = lorentz_inner(Y, Y)
    if np.any(q >= -1e-12):
        raise OptimizationError("transformed feature is not timelike")
    return Y / np.sqrt(-q)[..., None]


def aggregate(neighbors, weights=None):
    """Weighted Lorentzian centroid sum_j nu_j x_j / |‖sum_j nu_j x_j‖_L|."""
    X = np.atleast_2d(np.asarray(neighbors, dtype=float))
    if X.shape[0] == 0:
        raise InputError("cannot aggregate an empty neighborhood")
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (X.shape[0],):
        raise DimensionError("one weight per neighbor")
    if np.any(w < 0) or not np.any(w > 0):
        raise InputError("weights must be nonnegative and not all zero")
    return _normalize(w @ X)[0]


def tangent_relu(x):
    """Exp_0(relu(Log_0(x))); the time coordinate of the tangent vector stays 0."""
    return exp0(np.maximum(log0(x), 0.0))


def _relu_backward(g, G):
    """Backward of tangent_relu at points ``G`` (rows) for output gradient ``g``."""
    xs = G[:, 1:]
    rho = np.linalg.norm(xs, axis=1)
    a, b = _log0_coef(rho)
    u = a[:, None] * xs
    up = np.maximum(u, 0.0)
    phi = np.linalg.norm(up, axis=1)
    c, e = _exp0_coef(phi)
    g0, gs = g[:, 0], g[:, 1:]
    gup = (c[:, None] * gs + (e * np.sum(up * gs, axis=1))[:, None] * up
           + (g0 * c)[:, None] * up)
    gu = gup * (u > 0)
    gxs = a[:, None] * gu + (b * np.sum(xs * gu, axis=1))[:, None] * xs
    out = np.zeros_like(G)
    out[:, 1:] = gxs
    return out


def _log0_backward(gu, H):
    xs = H[:, 1:]
    a, b = _log0_coef(np.linalg.norm(xs, axis=1))
    out = np.zeros_like(H)
    out[:, 1:] = a[:, None] * gu + (b * np.sum(xs * gu, axis=1))[:, None] * xs
    return out


def propagation_matrix(num_nodes: int, edges, weights=None):
    """Row-normalized adjacency with self-loops, nu_ij = 1/(deg(i) + 1).

    A custom nonnegative (N, N) ``weights`` matrix replaces the uniform rule.
    """
    if weights is not None:
        A = sparse.csr_matrix(np.asarray(weights, dtype=float) if not sparse.issparse(weights)
                              else weights)
        if A.shape != (num_nodes, num_nodes) or (A.data < 0).any():
            raise InputError("weights must be a nonnegative (N, N) matrix")
        return A
    E = np.asarray(edges, dtype=int).reshape(-1, 2)
    E = E[E[:, 0] != E[:, 1]]
    rows = np.concatenate([E[:, 0], E[:, 1], np.arange(num_nodes)])
    cols = np.concatenate([E[:, 1], E[:, 0], np.arange(num_nodes)])
    A = sparse.csr_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(num_nodes, num_nodes))
    A.data[:] = 1.0  # collapse duplicate edges
    deg = np.asarray(A.sum(axis=1)).ravel()
    return sparse.diags(1.0 / deg) @ A


def _check_chain(layers: Sequence[NHLayerParams], in_dim: int):
    d = in_dim
    for i, layer in enumerate(layers):
        if layer.in_dim != d:
            raise DimensionError(f"layer {i} expects L^{layer.in_dim}, receives L^{d}")
        d = layer.out_dim
    return d


def _forward_cache(layers, A, X0):
    cache = []
    H = X0
    for layer in layers:
        W = layer.W
        Y = H @ W.T
        T, sY = _normalize(Y)
        S = A @ T
        G, sS = _normalize(S)
        out = tangent_relu(G)
        cache.append((H, W, Y, sY, S, sS, G))
        H = out
    return H, cache


def forward(layers: Sequence[NHLayerParams], graph_or_matrix, inputs):
    """Node representations after every layer (index 0 is the lifted input).

    ``graph_or_matrix`` is a :class:`GraphData` (uniform weights over all
    edges) or a precomputed propagation matrix.
    """
    X0 = np.atleast_2d(np.asarray(inputs, dtype=float))
    _check_chain(layers, X0.shape[1] - 1)
    if isinstance(graph_or_matrix, GraphData):
        A = propagation_matrix(graph_or_matrix.num_nodes, graph_or_matrix.edges)
    else:
        A = graph_or_matrix
    if A.shape[0] != X0.shape[0]:
        raise DimensionError("propagation matrix and inputs disagree on the node count")
    reps = [X0]
    H = X0
    for layer in layers:
        H = tangent_relu(_normalize(A @ feature_transform(layer, H))[0])
        reps.append(H)
    return reps


def _backward(layers, A, cache, gH):
    """Gradients wrt every W from the gradient at the last representation."""
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        H, W, Y, sY, S, sS, G = cache[i]
        gG = _relu_backward(gH, G)
        gS = _normalize_backward(gG, S, sS)
        gT = A.T @ gS
        gY = _normalize_backward(gT, Y, sY)
        grads[i] = gY.T @ H
        gH = gY @ W
    return grads


def decode_link(h_u, h_v, decoder: DecoderParams):
    """Fermi-Dirac probability 1 / (exp((d2 - r) / t) + 1), d2 = -1 - <h_u, h_v>_L."""
    d2 = squared_lorentz_distance(h_u, h_v)
    return _sigmoid((decoder.r_fd - d2) / decoder.t_fd)


def decode_class(h, decoder: DecoderParams, probabilities: bool = True):
    """Affine scores of Log_0(h); softmax probabilities unless ``probabilities`` is False."""
    if decoder.weight is None:
        raise InputError("decoder has no class head")
    z = log0(h) @ np.asarray(decoder.weight).T + np.asarray(decoder.bias)
    return _softmax(z) if probabilities else z


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# metrics


def metric_auc(scores, labels) -> float:
    """Rank-based ROC AUC; tied scores contribute one half."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if s.shape != y.shape or s.size == 0:
        raise InputError("scores and labels must be nonempty and the same length")
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both positive and negative labels")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def metric_f1(pred, labels) -> float:
    """Macro-averaged F1 over the classes present in ``labels`` or ``pred``."""
    p = np.asarray(pred).ravel()
    y = np.asarray(labels).ravel()
    if p.shape != y.shape or p.size == 0:
        raise InputError("predictions and labels must be nonempty and the same length")
    scores = []
    for c in np.union1d(p, y):
        tp = np.sum((p == c) & (y == c))
        denom = np.sum(p == c) + np.sum(y == c)
        scores.append(2.0 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def metric_accuracy(pred, labels) -> float:
    p, y = np.asarray(pred).ravel(), np.asarray(labels).ravel()
    if p.shape != y.shape or p.size == 0:
        raise InputError("predictions and labels must be nonempty and the same length")
    return float(np.mean(p == y))


# ---------------------------------------------------------------------------
# model and training


@dataclass
class TrainConfig:
    """Training settings. ``dims`` lists the output dimension of each layer."""

    task: str = "nc"  # "nc" or "lp"
    dims: Sequence[int] = (2, 2)
    optimizer: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(max_iter=200, grad_tol=1e-6, f_tol=1e-9))
    seed: int = 0
    alpha_scale: float = 0.1
    check_tol: float = 1e-8

    def __post_init__(self):
        if self.task not in ("nc", "lp"):
            raise InputError(f"unknown task {self.task!r} (expected 'nc' or 'lp')")
        self.dims = tuple(int(d) for d in self.dims)
        if not self.dims or min(self.dims) < 1:
            raise InputError("dims must be a nonempty list of positive integers")


@dataclass
class GCNModel:
    task: str
    layers: List[NHLayerParams]
    decoder: DecoderParams

    @property
    def in_dim(self):
        return self.layers[0].in_dim


@dataclass
class TrainResult:
    model: GCNModel
    trace: List[tuple]  # (step, loss, metric)
    metrics: dict
    max_constraint_residual: float
    max_point_residual: float

    def trace_csv(self) -> str:
        lines = ["step,loss,metric"]
        lines += [f"{s},{l!r},{m!r}" for s, l, m in self.trace]
        return "\n".join(lines) + "\n"


def _message_matrix(graph: GraphData, task: str):
    # link prediction only propagates along training edges, so held-out links stay hidden
    if task == "lp":
        pairs, labels = graph.edge_samples.select("train")
        return propagation_matrix(graph.num_nodes, pairs[labels == 1])
    return propagation_matrix(graph.num_nodes, graph.edges)


def _check_task(graph: GraphData, task: str):
    if task == "nc":
        if graph.labels is None or graph.node_split is None:
            raise InputError("node classification needs labels and node splits")
        if not np.any(graph.node_mask("train")):
            raise InputError("no training nodes")
    else:
        if graph.edge_samples is None:
            raise InputError("link prediction needs edge samples")
        _, y = graph.edge_samples.select("train")
        if y.size == 0:
            raise InputError("no training edge samples")


def _unpack(values, n_layers, task):
    layers = [NHLayerParams(values[3 * i], float(values[3 * i + 1]), values[3 * i + 2])
              for i in range(n_layers)]
    rest = values[3 * n_layers:]
    if task == "lp":
        dec = DecoderParams(r_fd=float(rest[0]), t_fd=float(np.exp(rest[1])))
    else:
        dec = DecoderParams(weight=np.asarray(rest[0]), bias=np.asarray(rest[1]))
    return layers, dec


def _pack(model: GCNModel) -> List[ParameterPoint]:
    params = []
    for i, layer in enumerate(model.layers):
        params += [ParameterPoint.stiefel(layer.P_tilde, f"P{i}"),
                   ParameterPoint.scalar(layer.alpha, f"alpha{i}"),
                   ParameterPoint.rotation(layer.Q, f"Q{i}")]
    d = model.decoder
    if model.task == "lp":
        params += [ParameterPoint.scalar(d.r_fd, "r_fd"), ParameterPoint.scalar(np.log(d.t_fd), "log_t_fd")]
    else:
        params += [ParameterPoint.euclidean(d.weight, "weight"), ParameterPoint.euclidean(d.bias, "bias")]
    return params


def _loss_terms(task, H, dec, targets):
    """Summed loss and its gradient wrt H and the decoder values."""
    if task == "lp":
        pairs, y = targets
        hu, hv = H[pairs[:, 0]], H[pairs[:, 1]]
        d2 = -1.0 - lorentz_inner(hu, hv)
        t = dec.t_fd
        z = (dec.r_fd - d2) / t
        loss = float(np.sum(_softplus(z) - y * z))
        gz = _sigmoid(z) - y
        gH = np.zeros_like(H)
        Jhv, Jhu = hv.copy(), hu.copy()
        Jhv[:, 0] *= -1
        Jhu[:, 0] *= -1
        np.add.at(gH, pairs[:, 0], (gz / t)[:, None] * Jhv)
        np.add.at(gH, pairs[:, 1], (gz / t)[:, None] * Jhu)
        return loss, gH, [float(np.sum(gz) / t), float(-np.sum(gz * z))]
    idx, y = targets
    U = log0(H[idx])
    logits = U @ dec.weight.T + dec.bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-np.sum(logp[np.arange(len(y)), y]))
    gl = np.exp(logp)
    gl[np.arange(len(y)), y] -= 1.0
    gU = gl @ dec.weight
    gH = np.zeros_like(H)
    gH[idx] = _log0_backward(gU, H[idx])
    return loss, gH, [gl.T @ U, gl.sum(axis=0)]


def _targets(graph, task, split):
    if task == "lp":
        pairs, y = graph.edge_samples.select(split)
        return pairs, y.astype(float)
    idx = np.flatnonzero(graph.node_mask(split))
    return idx, graph.labels[idx]


def make_objective(graph: GraphData, task: str, n_layers: int, split: str = "train"):
    """(objective, gradient) over packed parameter values for ``minimize``."""
    A = _message_matrix(graph, task)
    X0 = lift_features(graph.features)
    targets = _targets(graph, task, split)

    def objective(values):
        try:
            layers, dec = _unpack(values, n_layers, task)
        except (InputError, DimensionError):
            return np.inf
        with np.errstate(all="ignore"):
            H, _ = _forward_cache(layers, A, X0)
            loss = _loss_terms(task, H, dec, targets)[0]
        return loss if np.isfinite(loss) else np.inf

    def gradient(values):
        layers, dec = _unpack(values, n_layers, task)
        H, cache = _forward_cache(layers, A, X0)
        _, gH, gdec = _loss_terms(task, H, dec, targets)
        out = []
        for layer, gW in zip(layers, _backward(layers, A, cache, gH)):
            dP, dalpha, dQ = compose_gradients(layer.P_tilde, layer.alpha, layer.Q, gW)
            out += [dP, dalpha, dQ]
        return out + gdec

    return objective, gradient


def init_model(graph: GraphData, config: TrainConfig) -> GCNModel:
    rng = np.random.default_rng(config.seed)
    d = graph.features.shape[1]
    layers = []
    for m in config.dims:
        layers.append(NHLayerParams.random(d, m, rng, config.alpha_scale))
        d = m
    if config.task == "lp":
        # centre the Fermi-Dirac step on the initial squared distances of the training pairs
        H, _ = _forward_cache(layers, _message_matrix(graph, "lp"), lift_features(graph.features))
        pairs, _ = graph.edge_samples.select("train")
        d2 = -1.0 - lorentz_inner(H[pairs[:, 0]], H[pairs[:, 1]])
        dec = DecoderParams(r_fd=float(np.median(d2)), t_fd=float(max(np.std(d2), 1e-3)))
    else:
        k = int(graph.labels.max()) + 1
        dec = DecoderParams(weight=0.1 * rng.standard_normal((k, d)), bias=np.zeros(k))
    return GCNModel(config.task, layers, dec)


def predict(model: GCNModel, graph: GraphData):
    """Final node representations under the model's message-passing graph."""
    A = _message_matrix(graph, model.task)
    H, _ = _forward_cache(model.layers, A, lift_features(graph.features))
    return H


def evaluate(model: GCNModel, graph: GraphData, split: str = "test") -> dict:
    """Loss and metrics of a model on one split (AUC for lp; accuracy and F1 for nc)."""
    _check_task(graph, model.task)
    H = predict(model, graph)
    targets = _targets(graph, model.task, split)
    loss = _loss_terms(model.task, H, model.decoder, targets)[0]
    if model.task == "lp":
        pairs, y = targets
        p = decode_link(H[pairs[:, 0]], H[pairs[:, 1]], model.decoder)
        return {"loss": loss, "auc": metric_auc(p, y)}
    idx, y = targets
    pred = np.argmax(decode_class(H[idx], model.decoder, probabilities=False), axis=1)
    return {"loss": loss, "accuracy": metric_accuracy(pred, y), "f1": metric_f1(pred, y)}


def _validity(model, graph):
    A = _message_matrix(graph, model.task)
    reps = forward(model.layers, A, lift_features(graph.features))
    point_res = max(float(np.max(point_residual(R))) for R in reps)
    constr = max(layer.constraint_residual() for layer in model.layers)
    return constr, point_res


def train(graph: GraphData, config: Optional[TrainConfig] = None,
          model: Optional[GCNModel] = None) -> TrainResult:
    """Full-batch training by block-coordinate Riemannian descent.

    After every optimizer cycle the layer constraints W J W^T = J and the
    validity of every node representation are checked; a violation beyond
    ``config.check_tol`` raises :class:`TrainingError`.
    """
    cfg = config or TrainConfig()
    _check_task(graph, cfg.task)
    model = model or init_model(graph, cfg)
    _check_chain(model.layers, graph.features.shape[1])
    n_layers = len(model.layers)
    objective, gradient = make_objective(graph, cfg.task, n_layers)
    metric_name = "auc" if cfg.task == "lp" else "accuracy"
    val_split = "val"
    has_val = (np.any(graph.edge_samples.split == "val") if cfg.task == "lp"
               else np.any(graph.node_mask("val")))
    trace = []
    worst = [0.0, 0.0]

    def check(values, step, loss):
        layers, dec = _unpack(values, n_layers, cfg.task)
        current = GCNModel(cfg.task, layers, dec)
        constr, point_res = _validity(current, graph)
        worst[0], worst[1] = max(worst[0], constr), max(worst[1], point_res)
        if constr > cfg.check_tol or point_res > cfg.check_tol:
            raise TrainingError(f"invariant violated at step {step}: constraint {constr:.3e}, "
                                f"point {point_res:.3e}", trace=trace)
        metric = evaluate(current, graph, val_split)[metric_name] if has_val else float("nan")
        trace.append((step, float(loss), float(metric)))

    params = _pack(model)
    start = objective([p.value for p in params])
    if not np.isfinite(start):
        raise TrainingError("loss is not finite at initialization", trace=trace)
    check([p.value for p in params], 0, start)
    opt = replace(cfg.optimizer, mode="block", restarts=1)
    try:
        res = minimize(objective, params, opt, gradient=gradient,
                       callback=lambda it, ps, f: check([p.value for p in ps], it + 1, f))
    except TrainingError:
        raise
    except OptimizationError as err:
        raise TrainingError(str(err), trace=trace) from err
    layers, dec = _unpack([p.value for p in res.params], n_layers, cfg.task)
    final = GCNModel(cfg.task, layers, dec)
    metrics = {split: evaluate(final, graph, split) for split in SPLITS
               if (np.any(graph.edge_samples.split == split) if cfg.task == "lp"
                   else np.any(graph.node_mask(split)))}
    return TrainResult(final, trace, metrics, worst[0], worst[1])
