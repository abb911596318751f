import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialsearch.graph import (Graph, GraphError, GridCoords, ball, dfs_segments, dfs_walk, dimension_constant,
                                 make_grid, make_starfish, min_height_spanning_tree, read_graph, write_graph)


@pytest.mark.parametrize("d,side,n,m", [(2, 3, 9, 12), (1, 4, 4, 3), (3, 2, 8, 12)])
def test_grid_sizes(d, side, n, m):
    g = make_grid(d, side)
    assert (g.n, g.num_edges) == (n, m)


def test_starfish_shape():
    g = make_starfish(6, 2)
    assert g.n == 13
    assert g.diameter == 4
    assert len(g.neighbors(1)) == 6
    path = make_starfish(1, 3)
    assert path.n == 4 and path.num_edges == 3 and path.diameter == 3


@given(st.integers(1, 4), st.integers(1, 5), st.data())
def test_grid_coordinates_round_trip(d, side, data):
    gc = GridCoords(d, side)
    v = data.draw(st.integers(1, gc.n))
    assert gc.index(gc.coords(v)) == v


def test_grid_neighbours_differ_in_one_axis():
    g = make_grid(3, 3)
    for u, v in g.edges():
        diff = np.abs(np.subtract(g.grid.coords(u), g.grid.coords(v)))
        assert sorted(diff) == [0, 0, 1]


def test_ball_examples():
    g = make_grid(2, 3)
    centre = g.grid.index((1, 1))
    assert ball(g, centre, 0) == {centre}
    assert len(ball(g, centre, 1)) == 5
    assert len(ball(g, 1, g.diameter)) == g.n


def _kappa_bruteforce(g: Graph, d: float) -> float:
    best = np.inf
    for v in range(1, g.n + 1):
        dist = g.bfs(v)
        for r in range(1, int(dist.max()) + 1):
            size = int((dist <= r).sum())
            if size < g.n:
                best = min(best, size / r ** d)
    return best


def test_dimension_constant_matches_exhaustive_oracle():
    g = make_grid(2, 3)
    assert dimension_constant(g, 2) == pytest.approx(_kappa_bruteforce(g, 2))


def test_dimension_constant_path_shrinks():
    vals = [dimension_constant(make_grid(1, n), 2) for n in (8, 32, 128)]
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("g", [make_grid(1, 6), make_grid(2, 4), make_starfish(3, 3)])
def test_dimension_constant_at_least_one_in_d1(g):
    assert dimension_constant(g, 1) >= 1


@pytest.mark.parametrize("g,root,height", [(make_grid(1, 5), 1, 4), (make_grid(2, 3), 1, 4),
                                           (make_starfish(5, 1), 1, 1)])
def test_spanning_tree_height(g, root, height):
    assert min_height_spanning_tree(g, root).height == height


def test_dfs_walk_is_closed_and_covering():
    g = make_grid(2, 4)
    w = dfs_walk(g)
    assert w[0] == w[-1] == 1
    assert len(w) == 2 * g.n - 1
    assert set(w) == set(range(1, g.n + 1))
    assert all(g.has_edge(a, b) for a, b in zip(w, w[1:]))


def test_segments_examples():
    path = make_grid(1, 4)
    assert len(dfs_segments(path, 2 * path.n - 2).segments) == 1
    assert len(dfs_segments(path, 2).segments) == 3
    g = make_starfish(4, 3)
    sched = dfs_segments(g, 3)
    assert sched.covered() == set(range(1, g.n + 1))
    found = set().union(*(s.discovered for s in sched.segments))
    assert found == set(range(1, g.n + 1))
    for a, b in itertools.combinations(sched.segments, 2):
        assert not a.discovered & b.discovered
    for s in sched.segments:
        walk = s.walk()
        assert walk[0] == walk[-1] == 1
        assert all(g.has_edge(a, b) for a, b in zip(walk, walk[1:]))


def test_segment_length_validation():
    with pytest.raises(GraphError):
        dfs_segments(make_grid(1, 4), 0)


@settings(max_examples=25)
@given(st.integers(2, 12), st.integers(0, 2 ** 31))
def test_graph_file_round_trip(tmp_path_factory, n, seed):
    rng = np.random.default_rng(seed)
    edges = [(v, int(rng.integers(1, v))) for v in range(2, n + 1)]
    g = Graph.from_edges(n, edges)
    path = tmp_path_factory.mktemp("g") / "g.txt"
    write_graph(g, path)
    h = read_graph(path)
    assert h.n == g.n and h.edges() == g.edges()


@pytest.mark.parametrize("text", ["", "3\n1 1\n", "3\n1 4\n", "4\n1 2\n3 4\n", "2\n1 2 3\n"])
def test_bad_graph_files(tmp_path, text):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(GraphError):
        read_graph(p)


def test_without_edges_keeps_vertices():
    g = make_grid(2, 3)
    h = g.without_edges([(1, 2)])
    assert h.n == 9 and h.num_edges == 11 and not h.has_edge(1, 2)
    with pytest.raises(GraphError):
        make_grid(1, 3).without_edges([(1, 2)])
