"""Graphs, distances, connectivity, and periodic schedules."""

import numpy as np
import pytest

from minrule import (
    UNREACHABLE,
    ConfigError,
    Graph,
    GraphSequence,
    complete_graph,
    distances,
    is_connected,
    path_graph,
    random_tree,
    ring_graph,
    union_rooted_at,
)


def _union_find_components(n: int, edges) -> int:
    """Independent connectivity oracle."""
    parent = list(range(n + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(v) for v in range(1, n + 1)})


class TestGraph:
    def test_normalizes_and_deduplicates_edges(self):
        g = Graph(3, ((2, 1), (1, 2), (3, 2)))
        assert g.edges == ((1, 2), (2, 3))
        assert g.neighbors == ((2,), (1, 3), (2,))

    def test_rejects_self_loop(self):
        with pytest.raises(ConfigError):
            Graph(3, ((1, 1),))

    def test_rejects_out_of_range_vertex(self):
        with pytest.raises(ConfigError):
            Graph(3, ((1, 4),))

    def test_degree(self):
        assert path_graph(4).degree(2) == 2
        assert path_graph(4).degree(1) == 1


class TestDistances:
    def test_ring_matches_analytic_formula(self):
        n = 8
        d = distances(ring_graph(n))
        for i in range(n):
            for j in range(n):
                assert d[i, j] == min(abs(i - j), n - abs(i - j))

    def test_path_matches_analytic_formula(self):
        d = distances(path_graph(5))
        for i in range(5):
            for j in range(5):
                assert d[i, j] == abs(i - j)

    def test_complete_graph(self):
        d = distances(complete_graph(4))
        assert np.all(d[np.eye(4, dtype=bool)] == 0)
        assert np.all(d[~np.eye(4, dtype=bool)] == 1)

    def test_unreachable_marker(self):
        g = Graph(4, ((1, 2),))
        d = distances(g)
        assert d[0, 2] == UNREACHABLE
        assert d[2, 3] == UNREACHABLE
        assert d[0, 1] == 1


class TestConnectivity:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_random_trees_connected_with_n_minus_1_edges(self, seed):
        g = random_tree(10, seed=seed)
        assert len(g.edges) == 9
        assert is_connected(g)
        assert _union_find_components(10, g.edges) == 1

    def test_disconnected_detected(self):
        g = Graph(4, ((1, 2), (3, 4)))
        assert not is_connected(g)
        assert _union_find_components(4, g.edges) == 2

    def test_random_tree_deterministic(self):
        assert random_tree(12, seed=5).edges == random_tree(12, seed=5).edges

    def test_single_vertex_connected(self):
        assert is_connected(Graph(1, ()))


class TestGraphSequence:
    def test_static_sequence(self):
        seq = GraphSequence.static(path_graph(3))
        assert seq.is_static and seq.period == 1
        assert seq.at(1) is seq.at(17)

    def test_periodic_cycling(self):
        f1 = Graph(3, ((1, 2),))
        f2 = Graph(3, ((2, 3),))
        seq = GraphSequence(frames=(f1, f2))
        assert seq.at(1) is f1
        assert seq.at(2) is f2
        assert seq.at(3) is f1
        assert seq.at(8) is f2

    def test_rejects_empty_and_mismatched_frames(self):
        with pytest.raises(ConfigError):
            GraphSequence(frames=())
        with pytest.raises(ConfigError):
            GraphSequence(frames=(Graph(2, ()), Graph(3, ())))

    def test_rejects_step_below_one(self):
        with pytest.raises(ConfigError):
            GraphSequence.static(path_graph(2)).at(0)


class TestUnionRootedAt:
    def test_alternating_line_is_rooted_at_the_end(self):
        seq = GraphSequence(frames=(Graph(3, ((1, 2),)), Graph(3, ((2, 3),))))
        assert union_rooted_at(seq, 1, roots=[1])
        assert union_rooted_at(seq, 2, roots=[1])

    def test_isolated_vertex_breaks_rootedness(self):
        seq = GraphSequence(frames=(Graph(3, ((1, 2),)), Graph(3, ((1, 2),))))
        assert not union_rooted_at(seq, 1, roots=[1])
        assert union_rooted_at(seq, 1, roots=[1, 3])

    def test_static_connected_graph_trivially_rooted(self):
        assert union_rooted_at(GraphSequence.static(path_graph(4)), 1, roots=[2])

    def test_root_validation(self):
        seq = GraphSequence.static(path_graph(3))
        with pytest.raises(ConfigError):
            union_rooted_at(seq, 1, roots=[])
        with pytest.raises(ConfigError):
            union_rooted_at(seq, 1, roots=[9])
