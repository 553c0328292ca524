"""Readers and writers for point clouds, graphs, plots and model files.

Floats are written with ``repr`` so every writer/reader pair round-trips to
full precision. Malformed input raises :class:`ParseError` carrying the
1-based line number.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import DimensionError, ParseError
from .nested import NestingLevel, NestingStack
from .nhgcn import SPLITS, DecoderParams, EdgeSamples, GCNModel, GraphData, NHLayerParams

# ---------------------------------------------------------------------------
# helpers


def _fmt(x) -> str:
    return repr(float(x))


def _lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not any(line.strip() for line in lines):
        raise ParseError("file is empty", line=1, path=path)
    return lines


def _write(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _floats(cells, lineno, path):
    try:
        vals = [float(c) for c in cells]
    except ValueError as err:
        raise ParseError(f"not a number: {err}", line=lineno, path=path) from None
    if not all(np.isfinite(vals)):
        raise ParseError("non-finite value", line=lineno, path=path)
    return vals


def _int(cell, lineno, path):
    try:
        return int(cell)
    except ValueError:
        raise ParseError(f"not an integer: {cell!r}", line=lineno, path=path) from None


def _check_header(lines, expected, path, sep=","):
    got = lines[0].strip()
    if got != sep.join(expected):
        raise ParseError(f"bad header {got!r}; expected {sep.join(expected)!r}", line=1, path=path)


def _table(path, header_fn, sep=","):
    """Parse a headered numeric table; ``header_fn(ncols)`` gives the expected header."""
    lines = _lines(path)
    first = lines[0].strip().split(sep)
    _check_header(lines, header_fn(len(first)), path, sep)
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(sep)
        if len(cells) != len(first):
            raise ParseError(f"expected {len(first)} fields, found {len(cells)}", line=i, path=path)
        rows.append(_floats(cells, i, path))
    return np.array(rows, dtype=float).reshape(-1, len(first))


# ---------------------------------------------------------------------------
# point clouds


def point_header(n):
    return [f"x{i}" for i in range(n + 1)]


def write_points(path, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lines = [",".join(point_header(X.shape[1] - 1))]
    lines += [",".join(_fmt(v) for v in row) for row in X]
    _write(path, lines)


def read_points(path) -> np.ndarray:
    """Read a point-cloud CSV (header x0,...,xn). Points are not validated here."""
    X = _table(path, lambda k: point_header(k - 1))
    if X.shape[1] < 2:
        raise ParseError("point clouds need at least two coordinates", line=1, path=path)
    return X


# ---------------------------------------------------------------------------
# graphs

EDGE_HEADER = ("u", "v")
SAMPLE_HEADER = ("u", "v", "label", "split")


def write_edges(path, edges):
    lines = ["\t".join(EDGE_HEADER)]
    lines += [f"{int(u)}\t{int(v)}" for u, v in np.asarray(edges, dtype=int).reshape(-1, 2)]
    _write(path, lines)


def read_edges(path) -> np.ndarray:
    """Read ``u<TAB>v`` lines; the ``u v`` header line is optional."""
    lines = _lines(path)
    start = 1 if lines[0].strip().split("\t") == list(EDGE_HEADER) else 0
    edges = []
    for i, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        cells = line.strip().split("\t")
        if len(cells) != 2:
            raise ParseError("edge lines need exactly two tab-separated fields", line=i, path=path)
        u, v = _int(cells[0], i, path), _int(cells[1], i, path)
        if u < 0 or v < 0:
            raise ParseError("node ids must be nonnegative", line=i, path=path)
        edges.append((u, v))
    return np.array(edges, dtype=int).reshape(-1, 2)


def write_features(path, F):
    F = np.atleast_2d(np.asarray(F, dtype=float))
    lines = [",".join(f"f{j}" for j in range(F.shape[1]))]
    lines += [",".join(_fmt(v) for v in row) for row in F]
    _write(path, lines)


def read_features(path) -> np.ndarray:
    return _table(path, lambda k: [f"f{j}" for j in range(k)])


def _read_node_column(path, name, convert):
    lines = _lines(path)
    _check_header(lines, ["node", name], path)
    out = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.strip().split(",")
        if len(cells) != 2:
            raise ParseError("expected node,value", line=i, path=path)
        node = _int(cells[0], i, path)
        if node in out:
            raise ParseError(f"duplicate node {node}", line=i, path=path)
        out[node] = convert(cells[1], i)
    return out


def write_labels(path, labels):
    _write(path, ["node,label"] + [f"{i},{int(y)}" for i, y in enumerate(labels)])


def write_masks(path, split):
    _write(path, ["node,split"] + [f"{i},{s}" for i, s in enumerate(split)])


def read_labels(path, num_nodes) -> np.ndarray:
    d = _read_node_column(path, "label", lambda c, i: _int(c, i, path))
    return _dense(d, num_nodes, path, int)


def _split_value(path):
    def conv(cell, lineno):
        if cell not in SPLITS:
            raise ParseError(f"split must be one of {SPLITS}, got {cell!r}", line=lineno, path=path)
        return cell
    return conv


def read_masks(path, num_nodes) -> np.ndarray:
    d = _read_node_column(path, "split", _split_value(path))
    return _dense(d, num_nodes, path, "<U5")


def _dense(d, num_nodes, path, dtype):
    if sorted(d) != list(range(num_nodes)):
        raise ParseError(f"expected exactly one row for each of {num_nodes} nodes", path=path)
    return np.array([d[i] for i in range(num_nodes)], dtype=dtype)


def write_edge_samples(path, samples: EdgeSamples):
    lines = ["\t".join(SAMPLE_HEADER)]
    for (u, v), y, s in zip(samples.pairs, samples.labels, samples.split):
        lines.append(f"{int(u)}\t{int(v)}\t{int(y)}\t{s}")
    _write(path, lines)


def read_edge_samples(path) -> EdgeSamples:
    lines = _lines(path)
    _check_header(lines, SAMPLE_HEADER, path, sep="\t")
    pairs, labels, split = [], [], []
    conv = _split_value(path)
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.strip().split("\t")
        if len(cells) != 4:
            raise ParseError("expected u, v, label, split", line=i, path=path)
        y = _int(cells[2], i, path)
        if y not in (0, 1):
            raise ParseError("label must be 0 or 1", line=i, path=path)
        pairs.append((_int(cells[0], i, path), _int(cells[1], i, path)))
        labels.append(y)
        split.append(conv(cells[3], i))
    return EdgeSamples(np.array(pairs, dtype=int).reshape(-1, 2), np.array(labels, dtype=int),
                       np.array(split, dtype="<U5"))


GRAPH_FILES = {"edges": "edges.tsv", "features": "features.csv", "labels": "labels.csv",
               "masks": "masks.csv", "samples": "edge_samples.tsv"}


def write_graph(directory, graph: GraphData) -> List[str]:
    """Write a graph bundle into ``directory``; returns the written paths."""
    os.makedirs(directory, exist_ok=True)
    p = {k: os.path.join(directory, v) for k, v in GRAPH_FILES.items()}
    written = [p["edges"], p["features"]]
    write_edges(p["edges"], graph.edges)
    write_features(p["features"], graph.features)
    if graph.labels is not None:
        write_labels(p["labels"], graph.labels)
        written.append(p["labels"])
    if graph.node_split is not None:
        write_masks(p["masks"], graph.node_split)
        written.append(p["masks"])
    if graph.edge_samples is not None:
        write_edge_samples(p["samples"], graph.edge_samples)
        written.append(p["samples"])
    return written


def read_graph(directory) -> GraphData:
    """Read a graph bundle; labels, masks and edge samples are optional files."""
    p = {k: os.path.join(directory, v) for k, v in GRAPH_FILES.items()}
    F = read_features(p["features"])
    N = F.shape[0]
    edges = read_edges(p["edges"]) if os.path.exists(p["edges"]) else np.zeros((0, 2), int)
    if edges.size and edges.max() >= N:
        raise ParseError(f"edge endpoint {edges.max()} out of range for {N} nodes", path=p["edges"])
    labels = read_labels(p["labels"], N) if os.path.exists(p["labels"]) else None
    masks = read_masks(p["masks"], N) if os.path.exists(p["masks"]) else None
    samples = read_edge_samples(p["samples"]) if os.path.exists(p["samples"]) else None
    return GraphData(N, edges, F, labels, masks, samples)


# ---------------------------------------------------------------------------
# Poincare plots


def write_poincare_csv(path, P, labels=None):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    header = [f"p{i + 1}" for i in range(P.shape[1])] + (["label"] if labels is not None else [])
    lines = [",".join(header)]
    for k, row in enumerate(P):
        cells = [_fmt(v) for v in row]
        if labels is not None:
            cells.append(str(labels[k]))
        lines.append(",".join(cells))
    _write(path, lines)


def read_poincare_csv(path):
    lines = _lines(path)
    head = lines[0].strip().split(",")
    has_label = head[-1] == "label"
    k = len(head) - int(has_label)
    expected = [f"p{i + 1}" for i in range(k)] + (["label"] if has_label else [])
    _check_header(lines, expected, path)
    P, labels = [], []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(head):
            raise ParseError(f"expected {len(head)} fields", line=i, path=path)
        P.append(_floats(cells[:k], i, path))
        if has_label:
            labels.append(cells[-1])
    return np.array(P, dtype=float).reshape(-1, k), (labels if has_label else None)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def poincare_svg(points, labels=None, polylines=(), size: int = 400) -> str:
    """SVG of the unit disk with points (colored by label) and polylines."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.size and P.shape[1] != 2:
        raise DimensionError("SVG output needs 2-dimensional Poincare coordinates")
    half = size / 2.0
    rad = 0.95 * half

    def xy(p):
        return f"{half + rad * p[0]:.4f}", f"{half - rad * p[1]:.4f}"

    keys = sorted(set(labels), key=str) if labels is not None else []
    color = {k: _PALETTE[i % len(_PALETTE)] for i, k in enumerate(keys)}
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<circle cx="{half:.4f}" cy="{half:.4f}" r="{rad:.4f}" fill="none" stroke="black"/>']
    for line in polylines:
        pts = " ".join(",".join(xy(p)) for p in np.asarray(line, dtype=float))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#444444" stroke-width="1.5"/>')
    for k, p in enumerate(P):
        x, y = xy(p)
        c = color[labels[k]] if labels is not None else _PALETTE[0]
        out.append(f'<circle cx="{x}" cy="{y}" r="2.5" fill="{c}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# model files
#
# Sections start with "[name]"; inside, "key = value" lines come first and an
# optional matrix follows as CSV rows (introduced by "shape = rows,cols").


@dataclass
class Section:
    name: str
    values: Dict[str, str] = field(default_factory=dict)
    matrix: Optional[np.ndarray] = None
    line: int = 0


def format_sections(sections: List[Section]) -> str:
    lines = ["# nestedhyp model file, format 1"]
    for sec in sections:
        lines.append(f"[{sec.name}]")
        for k, v in sec.values.items():
            lines.append(f"{k} = {v}")
        if sec.matrix is not None:
            M = np.atleast_2d(np.asarray(sec.matrix, dtype=float))
            lines.append(f"shape = {M.shape[0]},{M.shape[1]}")
            lines += [",".join(_fmt(v) for v in row) for row in M]
        lines.append("")
    return "\n".join(lines)


def parse_sections(text: str, path=None) -> List[Section]:
    sections: List[Section] = []
    cur = None
    rows = None
    shape = None

    def close(lineno):
        if cur is not None and shape is not None:
            if len(rows) != shape[0]:
                raise ParseError(f"section [{cur.name}] expects {shape[0]} matrix rows, "
                                 f"found {len(rows)}", line=lineno, path=path)
            cur.matrix = np.array(rows, dtype=float).reshape(shape)

    lines = text.splitlines()
    if not any(line.strip() and not line.startswith("#") for line in lines):
        raise ParseError("model file is empty", line=1, path=path)
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            close(i)
            cur = Section(line[1:-1].strip(), line=i)
            sections.append(cur)
            rows, shape = [], None
            continue
        if cur is None:
            raise ParseError("content before the first section header", line=i, path=path)
        if shape is None and "=" in line:
            key, _, val = (s.strip() for s in line.partition("="))
            if key == "shape":
                try:
                    shape = tuple(int(s) for s in val.split(","))
                except ValueError:
                    shape = ()
                if len(shape) != 2 or min(shape) < 1:
                    raise ParseError(f"bad shape {val!r}", line=i, path=path)
            else:
                cur.values[key] = val
            continue
        if shape is None:
            raise ParseError("matrix row without a preceding 'shape =' line", line=i, path=path)
        cells = line.split(",")
        if len(cells) != shape[1]:
            raise ParseError(f"expected {shape[1]} matrix columns, found {len(cells)}", line=i,
                             path=path)
        if len(rows) >= shape[0]:
            raise ParseError("too many matrix rows", line=i, path=path)
        rows.append(_floats(cells, i, path))
    close(len(lines))
    return sections


def _need(sec: Section, key, path, conv=float):
    if key not in sec.values:
        raise ParseError(f"section [{sec.name}] lacks key {key!r}", line=sec.line, path=path)
    try:
        return conv(sec.values[key])
    except ValueError:
        raise ParseError(f"bad value for {key!r}: {sec.values[key]!r}", line=sec.line,
                         path=path) from None


def _matrix(sec: Section, path):
    if sec.matrix is None:
        raise ParseError(f"section [{sec.name}] needs a matrix", line=sec.line, path=path)
    return sec.matrix


def model_sections(model) -> List[Section]:
    from .reduction import TangentPcaModel

    if isinstance(model, NestingStack):
        secs = [Section("model", {"kind": "nh", "levels": str(len(model))})]
        for i, level in enumerate(model.levels):
            secs.append(Section(f"level {i}", {"r": _fmt(level.r)}, level.Lambda))
        return secs
    if isinstance(model, TangentPcaModel):
        return [Section("model", {"kind": "tpca", "target_dim": str(model.target_dim)}),
                Section("mean", {}, model.mean[None, :]),
                Section("frame", {}, model.frame),
                Section("variances", {}, model.variances[None, :])]
    if isinstance(model, GCNModel):
        secs = [Section("model", {"kind": "gcn", "task": model.task,
                                  "layers": str(len(model.layers))})]
        for i, layer in enumerate(model.layers):
            secs.append(Section(f"layer {i} P_tilde", {"alpha": _fmt(layer.alpha)}, layer.P_tilde))
            secs.append(Section(f"layer {i} Q", {}, layer.Q))
        d = model.decoder
        if model.task == "lp":
            secs.append(Section("decoder", {"r_fd": _fmt(d.r_fd), "t_fd": _fmt(d.t_fd)}))
        else:
            secs.append(Section("decoder weight", {}, d.weight))
            secs.append(Section("decoder bias", {}, np.asarray(d.bias)[None, :]))
        return secs
    raise TypeError(f"cannot serialize {type(model).__name__}")


def write_model(path, model):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_sections(model_sections(model)))


def model_from_sections(secs: List[Section], path=None):
    from .errors import HyperbolicError
    from .reduction import TangentPcaModel

    by_name = {s.name: s for s in secs}
    if "model" not in by_name:
        raise ParseError("missing [model] section", line=1, path=path)
    head = by_name["model"]
    kind = _need(head, "kind", path, str)

    def get(name):
        if name not in by_name:
            raise ParseError(f"missing [{name}] section", path=path)
        return by_name[name]

    try:
        if kind == "nh":
            n = _need(head, "levels", path, int)
            levels = []
            for i in range(n):
                sec = get(f"level {i}")
                levels.append(NestingLevel(_matrix(sec, path), _need(sec, "r", path)))
            return NestingStack(tuple(levels))
        if kind == "tpca":
            return TangentPcaModel(_matrix(get("mean"), path)[0], _matrix(get("frame"), path),
                                   _matrix(get("variances"), path)[0],
                                   _need(head, "target_dim", path, int))
        if kind == "gcn":
            task = _need(head, "task", path, str)
            layers = []
            for i in range(_need(head, "layers", path, int)):
                ps = get(f"layer {i} P_tilde")
                layers.append(NHLayerParams(_matrix(ps, path), _need(ps, "alpha", path),
                                            _matrix(get(f"layer {i} Q"), path)))
            if task == "lp":
                d = get("decoder")
                dec = DecoderParams(r_fd=_need(d, "r_fd", path), t_fd=_need(d, "t_fd", path))
            else:
                dec = DecoderParams(weight=_matrix(get("decoder weight"), path),
                                    bias=_matrix(get("decoder bias"), path)[0])
            return GCNModel(task, layers, dec)
    except HyperbolicError as err:
        if isinstance(err, ParseError):
            raise
        raise ParseError(f"invalid model parameters: {err}", path=path) from err
    raise ParseError(f"unknown model kind {kind!r}", line=head.line, path=path)


def read_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return model_from_sections(parse_sections(text, path), path)
