import json
import math
from itertools import product

import pytest

from zrpgap.flow import all_shortest_paths
from zrpgap.graphs import (
    Complete,
    Torus,
    bfs_distance_counts,
    diameter,
    graph_from_json,
    shortest_path_data,
)


def test_torus_basic_structure():
    g = Torus(d=2, L=3)
    assert g.vertex_count == 9
    assert g.degree == 4
    assert not g.degenerate
    for v in range(9):
        assert g.vertex(g.coords(v)) == v
        nbrs = g.neighbors(v)
        assert len(nbrs) == 4
        assert v not in nbrs


def test_torus_degenerate_side_two():
    g = Torus(d=1, L=2)
    assert g.degenerate
    assert g.neighbors(0) == (1, 1)
    assert g.degree == 2


def test_complete_structure():
    g = Complete(5)
    assert g.vertex_count == 5
    assert g.degree == 4
    assert g.neighbors(2) == (0, 1, 3, 4)
    assert not g.degenerate


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        Torus(d=0, L=3)
    with pytest.raises(ValueError):
        Torus(d=1, L=1)
    with pytest.raises(ValueError):
        Complete(1)
    with pytest.raises(ValueError):
        Complete(3).neighbors(3)


def test_shortest_path_examples():
    assert shortest_path_data(Torus(1, 5), 0, 2) == (2, 1)
    assert shortest_path_data(Torus(1, 4), 0, 2) == (2, 2)
    t = Torus(2, 3)
    assert shortest_path_data(t, t.vertex((0, 0)), t.vertex((1, 1))) == (2, 2)
    assert shortest_path_data(Complete(6), 1, 4) == (1, 1)
    assert shortest_path_data(Torus(1, 5), 3, 3) == (0, 1)


@pytest.mark.parametrize("graph", [Torus(1, 4), Torus(1, 5), Torus(2, 3), Complete(5)])
def test_path_counts_match_exhaustive_enumeration(graph):
    dists = [bfs_distance_counts(graph, u)[0] for u in range(graph.vertex_count)]
    for u in range(graph.vertex_count):
        _, counts = bfs_distance_counts(graph, u)
        for v in range(graph.vertex_count):
            if u == v:
                continue
            paths = all_shortest_paths(graph, u, v, dists)
            assert len(paths) == counts[v]


def test_torus_counts_match_closed_form():
    # multinomial over per-axis step counts, doubled for each antipodal axis
    g = Torus(2, 4)
    for u in range(g.vertex_count):
        for v in range(g.vertex_count):
            cu, cv = g.coords(u), g.coords(v)
            steps = []
            arcs = 1
            for a, b in zip(cu, cv):
                delta = (b - a) % g.L
                k = min(delta, g.L - delta)
                steps.append(k)
                if k > 0 and 2 * k == g.L:
                    arcs *= 2
            total = sum(steps)
            expected = arcs * math.factorial(total)
            for k in steps:
                expected //= math.factorial(k)
            assert shortest_path_data(g, u, v) == (total, expected)


def test_shortest_path_symmetry():
    for graph in (Torus(1, 6), Torus(2, 3), Complete(4)):
        for u, v in product(range(graph.vertex_count), repeat=2):
            assert shortest_path_data(graph, u, v) == shortest_path_data(graph, v, u)


def test_diameter():
    assert diameter(Torus(1, 3)) == 1
    assert diameter(Torus(1, 4)) == 2
    assert diameter(Torus(2, 3)) == 2
    assert diameter(Complete(7)) == 1


def test_json_roundtrip():
    for graph in (Torus(1, 4), Torus(3, 2), Complete(5)):
        blob = json.dumps(graph.as_json())
        assert graph_from_json(json.loads(blob)) == graph
    with pytest.raises(ValueError):
        graph_from_json({"family": "hypercube", "n": 3})
