"""
Tests for graph ingestion, shortest paths and synthetic graphs.
"""

import os
import sys
import tempfile

import numpy as np
import pytest

sys.path.insert(0, 'src')

from advlayout.errors import ArgumentError, ParseError, ValidationError
from advlayout.graph import (
    GRAPHML_SUBSET,
    Graph,
    complete_graph,
    grid_graph,
    load_graph,
    parse_edge_list,
    parse_graphml_subset,
    path_graph,
    random_graph,
    save_graph,
    shortest_paths,
)


def test_parse_edge_list_path():
    g = parse_edge_list("# a path\n3 2\n0 1\n\n1 2\n")
    assert g.node_count == 3
    assert g.edges == ((0, 1), (1, 2))


def test_parse_edge_list_compacts_ids_by_first_appearance():
    g = parse_edge_list("3 2\n2 1\n1 0\n")
    assert g.edges == ((0, 1), (1, 2))


def test_parse_edge_list_header_mismatch():
    with pytest.raises(ParseError):
        parse_edge_list("3 3\n0 1\n1 2\n")


def test_parse_edge_list_rejects_self_loop():
    with pytest.raises(ValidationError):
        parse_edge_list("2 2\n0 1\n0 0\n")


def test_parse_edge_list_rejects_out_of_range():
    with pytest.raises(ValidationError):
        parse_edge_list("2 1\n0 5\n")


def test_parse_edge_list_rejects_isolated_node():
    with pytest.raises(ValidationError):
        parse_edge_list("3 1\n0 1\n")


def test_parse_edge_list_rejects_disconnected():
    with pytest.raises(ValidationError):
        parse_edge_list("4 2\n0 1\n2 3\n")


def test_parse_edge_list_rejects_garbage():
    with pytest.raises(ParseError):
        parse_edge_list("3 2\n0 one\n1 2\n")


def test_from_edges_rejects_duplicates():
    with pytest.raises(ValidationError):
        Graph.from_edges(3, [(0, 1), (1, 0), (1, 2)])


def test_parse_graphml_subset():
    text = """<?xml version="1.0"?>
<graphml xmlns="http://graphml.graphdrawing.org/xmlns">
  <graph edgedefault="undirected">
    <node id="a"/><node id="b"/><node id="c"/>
    <edge source="a" target="b"/>
    <edge source="c" target="b"/>
  </graph>
</graphml>"""
    g = parse_graphml_subset(text)
    assert g.node_count == 3
    assert g.edges == ((0, 1), (1, 2))


def test_parse_graphml_undeclared_node():
    with pytest.raises(ParseError):
        parse_graphml_subset('<graphml><graph><node id="a"/><edge source="a" target="z"/></graph></graphml>')


def test_shortest_paths_path_and_grid():
    d = shortest_paths(path_graph(4))
    assert d.d[0, 3] == 3
    assert np.array_equal(d.d, d.d.T)

    grid = shortest_paths(grid_graph(3, 3))
    assert grid.d[0, 8] == 4
    i, j, dij = grid.pairs()
    assert len(i) == 36
    assert dij.min() == 1.0


def floyd_warshall(g):
    n = g.node_count
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v in g.edges:
        dist[u, v] = dist[v, u] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


@pytest.mark.parametrize("seed", range(100))
def test_shortest_paths_match_floyd_warshall(seed):
    g = random_graph((5, 25), [0.0, 0.2, 0.5, 1.0][seed % 4], seed=seed)
    assert np.array_equal(shortest_paths(g).d.astype(float), floyd_warshall(g))


def test_edge_index_holds_both_directions():
    g = path_graph(3)
    src, dst = g.edge_index()
    assert sorted(zip(src.tolist(), dst.tolist())) == [(0, 1), (1, 0), (1, 2), (2, 1)]


def test_random_graph_edge_count_and_connectivity():
    g = random_graph(20, 0.35, seed=3)
    assert g.node_count == 20
    assert g.edge_count == 25
    assert g.is_connected()


def test_random_graph_is_deterministic_per_seed():
    assert random_graph((10, 20), 0.35, seed=11) == random_graph((10, 20), 0.35, seed=11)
    sizes = {random_graph((10, 20), 0.35, seed=s).node_count for s in range(20)}
    assert all(10 <= n <= 20 for n in sizes)


def test_random_graph_too_many_extra_edges():
    with pytest.raises(ArgumentError):
        random_graph(3, 5.0, seed=0)


def test_relabel_preserves_structure():
    g = random_graph(8, 0.5, seed=1)
    perm = [3, 0, 7, 1, 6, 2, 5, 4]
    h = g.relabel(perm)
    assert h.edge_count == g.edge_count
    for u, v in g.edges:
        assert h.adjacency[perm[u], perm[v]]


def test_save_and_load_graph():
    g = complete_graph(4)
    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, "k4.txt")
        save_graph(g, path)
        assert load_graph(path) == g


def test_load_graph_missing_file():
    with pytest.raises(ParseError):
        load_graph("/nonexistent/graph.txt")


def test_load_graph_unknown_format():
    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, "g.txt")
        save_graph(path_graph(2), path)
        with pytest.raises(ArgumentError):
            load_graph(path, "adjacency_matrix")
        with pytest.raises(ParseError):
            load_graph(path, GRAPHML_SUBSET)
