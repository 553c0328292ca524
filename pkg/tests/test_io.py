import numpy as np
import pytest

from nestedhyp import group, io, lorentz, nested, nhgcn, reduction
from nestedhyp.datasets import two_community_graph
from nestedhyp.errors import DimensionError, ParseError


def test_points_round_trip(tmp_path, rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(5), 2.0, 30, rng)
    p = tmp_path / "x.csv"
    io.write_points(p, X)
    assert p.read_text().splitlines()[0] == "x0,x1,x2,x3,x4,x5"
    np.testing.assert_array_equal(io.read_points(p), X)


def test_points_parse_errors(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("")
    with pytest.raises(ParseError, match="empty"):
        io.read_points(p)
    p.write_text("a,b\n1,0\n")
    with pytest.raises(ParseError, match="x0,x1") as e:
        io.read_points(p)
    assert e.value.line == 1
    p.write_text("x0,x1\n1,0\n1,0,3\n")
    with pytest.raises(ParseError) as e:
        io.read_points(p)
    assert e.value.line == 3
    p.write_text("x0,x1\n1,zero\n")
    with pytest.raises(ParseError):
        io.read_points(p)
    p.write_text("x0,x1\n1,nan\n")
    with pytest.raises(ParseError):
        io.read_points(p)


def test_edges_header_optional(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("0\t1\n1\t2\n")
    np.testing.assert_array_equal(io.read_edges(p), [[0, 1], [1, 2]])
    io.write_edges(p, [[3, 4]])
    assert p.read_text() == "u\tv\n3\t4\n"
    p.write_text("0\t1\t2\n")
    with pytest.raises(ParseError):
        io.read_edges(p)
    p.write_text("0\t-1\n")
    with pytest.raises(ParseError):
        io.read_edges(p)


def test_graph_round_trip(tmp_path):
    g = two_community_graph(size=10, seed=3)
    written = io.write_graph(tmp_path / "g", g)
    assert len(written) == 5
    h = io.read_graph(tmp_path / "g")
    np.testing.assert_array_equal(h.edges, g.edges)
    np.testing.assert_array_equal(h.features, g.features)
    np.testing.assert_array_equal(h.labels, g.labels)
    np.testing.assert_array_equal(h.node_split, g.node_split)
    np.testing.assert_array_equal(h.edge_samples.pairs, g.edge_samples.pairs)
    np.testing.assert_array_equal(h.edge_samples.labels, g.edge_samples.labels)
    np.testing.assert_array_equal(h.edge_samples.split, g.edge_samples.split)


def test_graph_optional_files(tmp_path, rng):
    g = nhgcn.GraphData(3, [[0, 1]], rng.standard_normal((3, 2)))
    io.write_graph(tmp_path, g)
    h = io.read_graph(tmp_path)
    assert h.labels is None and h.node_split is None and h.edge_samples is None


def test_graph_parse_errors(tmp_path, rng):
    g = two_community_graph(size=5, seed=0)
    io.write_graph(tmp_path, g)
    (tmp_path / "masks.csv").write_text("node,split\n0,dev\n")
    with pytest.raises(ParseError):
        io.read_graph(tmp_path)
    io.write_graph(tmp_path, g)
    (tmp_path / "labels.csv").write_text("node,label\n0,1\n")
    with pytest.raises(ParseError):  # missing nodes
        io.read_graph(tmp_path)
    io.write_graph(tmp_path, g)
    (tmp_path / "edges.tsv").write_text("0\t99\n")
    with pytest.raises(ParseError):
        io.read_graph(tmp_path)


def test_poincare_csv_and_svg(tmp_path, rng):
    P = lorentz.to_poincare(lorentz.sample_wrapped_normal(lorentz.origin(2), 1.0, 10, rng))
    labels = ["a", "b"] * 5
    p = tmp_path / "p.csv"
    io.write_poincare_csv(p, P, labels)
    Q, lab = io.read_poincare_csv(p)
    np.testing.assert_array_equal(Q, P)
    assert lab == labels
    io.write_poincare_csv(p, P)
    assert io.read_poincare_csv(p)[1] is None
    svg = io.poincare_svg(P, labels, polylines=[P[:3]])
    assert svg.startswith("<svg") and svg.count("<circle") == 11 and "<polyline" in svg
    assert svg == io.poincare_svg(P, labels, polylines=[P[:3]])
    with pytest.raises(DimensionError):
        io.poincare_svg(np.zeros((2, 3)))


def _nh_stack(rng):
    return nested.NestingStack((nested.NestingLevel(group.random_lorentz(4, rng), 0.25),
                                nested.NestingLevel(group.random_lorentz(3, rng), -1 / 3)))


def test_model_round_trips(tmp_path, rng):
    p = tmp_path / "m.txt"
    stack = _nh_stack(rng)
    io.write_model(p, stack)
    back = io.read_model(p)
    for a, b in zip(stack.levels, back.levels):
        np.testing.assert_array_equal(a.Lambda, b.Lambda)
        assert a.r == b.r

    tp = reduction.fit_tangent_pca(lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 20, rng), 2).model
    io.write_model(p, tp)
    back = io.read_model(p)
    np.testing.assert_array_equal(back.mean, tp.mean)
    np.testing.assert_array_equal(back.frame, tp.frame)
    assert back.target_dim == 2

    g = two_community_graph(size=5, seed=0)
    for task in ("nc", "lp"):
        model = nhgcn.init_model(g, nhgcn.TrainConfig(task=task, dims=(2, 1)))
        io.write_model(p, model)
        back = io.read_model(p)
        assert back.task == task
        for a, b in zip(model.layers, back.layers):
            np.testing.assert_array_equal(a.W, b.W)
        assert nhgcn.evaluate(back, g, "train") == nhgcn.evaluate(model, g, "train")


def test_model_parse_errors(tmp_path, rng):
    with pytest.raises(ParseError, match="empty"):
        io.parse_sections("# only a comment\n")
    with pytest.raises(ParseError) as e:
        io.parse_sections("kind = nh\n")
    assert e.value.line == 1
    with pytest.raises(ParseError) as e:
        io.parse_sections("[a]\nshape = 2,2\n1,0\n0,1,5\n")
    assert e.value.line == 4
    with pytest.raises(ParseError):
        io.parse_sections("[a]\nshape = 2,2\n1,0\n")
    with pytest.raises(ParseError):
        io.model_from_sections(io.parse_sections("[model]\nkind = pga\n"))
    text = io.format_sections(io.model_sections(_nh_stack(rng)))
    with pytest.raises(ParseError, match="level 1"):
        io.model_from_sections(io.parse_sections(text.split("[level 1]")[0]))
    bad = io.parse_sections("[model]\nkind = nh\nlevels = 1\n[level 0]\nr = 0\nshape = 2,2\n2,0\n0,2\n")
    with pytest.raises(ParseError, match="invalid model"):
        io.model_from_sections(bad)
