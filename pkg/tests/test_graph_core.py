import numpy as np
import pytest

from netsample import (
    Graph,
    NodeFeature,
    ParseError,
    ValidationError,
    k_core,
    largest_connected_component,
    load_edge_list,
    load_node_feature,
    save_edge_list,
    save_node_feature,
)

from conftest import graph_from_edges, path_graph, triangle_pendant_graph


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_basic_edge_list(tmp_path):
    p = write(tmp_path, "e.txt", "# a comment\n0 1\n1 2 2.5\n\n2 3\n")
    g = load_edge_list(p)
    assert g.n == 4
    assert g.num_edges == 3
    assert g.adj[1, 2] == 2.5
    assert g.adj[2, 1] == 2.5
    g.validate()


def test_labels_remap_sorted(tmp_path):
    p = write(tmp_path, "e.txt", "10 7\n7 300\n")
    g = load_edge_list(p)
    assert list(g.labels) == [7, 10, 300]
    # node 7 is internal 0, connected to both others
    assert set(g.neighbors(0)) == {1, 2}


def test_same_direction_duplicates_sum(tmp_path):
    p = write(tmp_path, "e.txt", "0 1 1.0\n0 1 2.0\n")
    g = load_edge_list(p)
    assert g.adj[0, 1] == 3.0
    assert g.num_edges == 1


def test_both_directions_must_agree(tmp_path):
    ok = write(tmp_path, "ok.txt", "0 1 2.0\n1 0 2.0\n")
    g = load_edge_list(ok)
    assert g.adj[0, 1] == 2.0
    bad = write(tmp_path, "bad.txt", "0 1 2.0\n1 0 3.0\n")
    with pytest.raises(ValidationError, match="both directions"):
        load_edge_list(bad)


@pytest.mark.parametrize(
    "content,exc,match",
    [
        ("0\n", ParseError, "line 1"),
        ("0 1 2 3\n", ParseError, "line 1"),
        ("a b\n", ParseError, "line 1"),
        ("-1 2\n", ParseError, "nonnegative"),
        ("0 1 -2\n", ValidationError, "positive"),
        ("0 1 nan\n", ValidationError, "finite|positive"),
        ("", ValidationError, "no edges"),
    ],
)
def test_load_errors(tmp_path, content, exc, match):
    p = write(tmp_path, "bad.txt", content)
    with pytest.raises(exc, match=match):
        load_edge_list(p)


def test_save_round_trip(tmp_path):
    g = graph_from_edges([(0, 1), (1, 2), (0, 3)], weights=[1.0, 0.25, 7.0])
    p = tmp_path / "out.txt"
    save_edge_list(g, p)
    g2 = load_edge_list(p)
    assert g2.n == g.n
    assert (g2.adj != g.adj).nnz == 0


def test_degrees_weighted_and_unweighted():
    g = graph_from_edges([(0, 1), (1, 2)], weights=[2.0, 3.0])
    assert list(g.degrees) == [2.0, 5.0, 3.0]
    assert list(g.unweighted_degrees) == [1, 2, 1]


def test_validate_rejects_asymmetry():
    from scipy.sparse import csr_matrix

    adj = csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    g = Graph(adj=adj, labels=np.arange(2))
    with pytest.raises(ValidationError, match="symmetric"):
        g.validate()


def test_k_core_triangle_with_pendant():
    g = triangle_pendant_graph()
    core = k_core(g, 2)
    assert core.n == 3
    assert set(core.labels) == {0, 1, 2}
    # idempotent
    again = k_core(core, 2)
    assert again.n == 3


def test_k_core_can_empty():
    g = path_graph(5)
    core = k_core(g, 2)
    assert core.n == 0


def test_k_core_rejects_bad_k():
    with pytest.raises(ValidationError):
        k_core(path_graph(3), 0)


def test_largest_component_and_tie_break():
    # components {0,1,2} and {3,4}: larger one wins
    g = graph_from_edges([(0, 1), (1, 2), (3, 4)])
    lcc = largest_connected_component(g)
    assert sorted(lcc.labels) == [0, 1, 2]
    # tie: {0,1} vs {2,3}, the one holding internal node 0 wins
    g2 = graph_from_edges([(0, 1), (2, 3)])
    lcc2 = largest_connected_component(g2)
    assert sorted(lcc2.labels) == [0, 1]


def test_node_feature_round_trip(tmp_path):
    g = path_graph(3)
    feat = NodeFeature(values=[1.5, -2.0, 0.0], name="score")
    p = tmp_path / "y.csv"
    save_node_feature(feat, g, p)
    back = load_node_feature(p, g, name="score")
    assert np.array_equal(back.values, feat.values)
    assert back.name == "score"


def test_node_feature_header_optional(tmp_path):
    g = path_graph(2)
    no_header = write(tmp_path, "a.csv", "0,1.0\n1,2.0\n")
    with_header = write(tmp_path, "b.csv", "label,value\n0,1.0\n1,2.0\n")
    for p in (no_header, with_header):
        feat = load_node_feature(p, g)
        assert list(feat.values) == [1.0, 2.0]


@pytest.mark.parametrize(
    "content,match",
    [
        ("0,1.0\n", "missing value for label 1"),
        ("0,1.0\n0,2.0\n1,3.0\n", "duplicate value for label 0"),
        ("0,1.0\n1,abc\n", "non-numeric"),
        ("0,1.0\n1,2.0\n5,1.0\n", "label 5"),
    ],
)
def test_node_feature_errors(tmp_path, content, match):
    g = path_graph(2)
    p = write(tmp_path, "bad.csv", content)
    with pytest.raises(ValidationError, match=match):
        load_node_feature(p, g)


def test_node_feature_rejects_nan():
    with pytest.raises(ValidationError, match="finite"):
        NodeFeature(values=[1.0, np.nan])
