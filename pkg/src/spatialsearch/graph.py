"""Graphs the search algorithms run on.

Vertices are labelled ``1..n``.  A :class:`Graph` is immutable once built, so
one instance can be shared by many simulations.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

MAX_VERTICES = 1 << 22
EXHAUSTIVE_KAPPA_LIMIT = 10_000


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class GridCoords:
    """Row-major bijection between coordinates in ``[0, side)^d`` and vertex labels."""

    d: int
    side: int

    @property
    def n(self) -> int:
        return self.side ** self.d

    def index(self, coords: Sequence[int]) -> int:
        if len(coords) != self.d:
            raise GraphError(f"expected {self.d} coordinates, got {len(coords)}")
        out = 0
        for j, c in enumerate(coords):
            if not 0 <= c < self.side:
                raise GraphError(f"coordinate {c} outside [0, {self.side})")
            out += c * self.side ** j
        return out + 1

    def coords(self, v: int) -> tuple[int, ...]:
        if not 1 <= v <= self.n:
            raise GraphError(f"vertex {v} outside 1..{self.n}")
        v -= 1
        out = []
        for _ in range(self.d):
            v, c = divmod(v, self.side)
            out.append(c)
        return tuple(out)

    def coord_array(self) -> np.ndarray:
        """``(n, d)`` integer array; row ``v-1`` holds the coordinates of ``v``."""
        idx = np.arange(self.n)
        return np.stack([(idx // self.side ** j) % self.side for j in range(self.d)], axis=1)


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    adjacency: tuple[tuple[int, ...], ...]  # adjacency[v-1] = sorted neighbours of v
    grid: GridCoords | None = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self) -> None:
        if self.n < 1:
            raise GraphError("a graph needs at least one vertex")
        if len(self.adjacency) != self.n:
            raise GraphError("adjacency list length differs from n")
        for v, nbrs in enumerate(self.adjacency, start=1):
            for u in nbrs:
                if u == v:
                    raise GraphError(f"self-loop at {v}")
                if not 1 <= u <= self.n:
                    raise GraphError(f"neighbour {u} of {v} out of range")
                if v not in self.adjacency[u - 1]:
                    raise GraphError(f"edge {v}-{u} is not symmetric")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], *, grid: GridCoords | None = None,
                   name: str = "", check_connected: bool = True) -> "Graph":
        if n > MAX_VERTICES:
            raise GraphError(f"{n} vertices exceeds the size cap {MAX_VERTICES}")
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise GraphError(f"self-loop at {u}")
            if not (1 <= u <= n and 1 <= v <= n):
                raise GraphError(f"edge ({u}, {v}) out of range 1..{n}")
            nbrs[u - 1].add(v)
            nbrs[v - 1].add(u)
        g = cls(n, tuple(tuple(sorted(s)) for s in nbrs), grid, name)
        if check_connected and not g.is_connected():
            raise GraphError("graph is not connected")
        return g

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v - 1]

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(1, self.n + 1) for v in self.adjacency[u - 1] if u < v]

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    @cached_property
    def edge_keys(self) -> np.ndarray:
        """Sorted ``u * (n + 1) + v`` codes for every edge with ``u < v``."""
        e = np.array(self.edges(), dtype=np.int64).reshape(-1, 2)
        return np.sort(e[:, 0] * (self.n + 1) + e[:, 1])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u - 1] if 1 <= u <= self.n else False

    def adjacent_pairs(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Vectorised adjacency test for equal-length vertex arrays."""
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        codes = lo.astype(np.int64) * (self.n + 1) + hi
        keys = self.edge_keys
        if not len(keys):
            return np.zeros(len(codes), dtype=bool)
        pos = np.clip(np.searchsorted(keys, codes), 0, len(keys) - 1)
        return keys[pos] == codes

    def bfs(self, source: int) -> np.ndarray:
        """Distances from ``source``; entry ``v-1`` is the distance to ``v`` (-1 if unreachable)."""
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[source - 1] = 0
        frontier = [source]
        while frontier:
            nxt = []
            for u in frontier:
                du = dist[u - 1] + 1
                for w in self.adjacency[u - 1]:
                    if dist[w - 1] < 0:
                        dist[w - 1] = du
                        nxt.append(w)
            frontier = nxt
        return dist

    def is_connected(self) -> bool:
        return bool((self.bfs(1) >= 0).all())

    @cached_property
    def csr(self) -> csr_matrix:
        e = np.array(self.edges(), dtype=np.int64).reshape(-1, 2) - 1
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))

    def distance_rows(self, sources: Sequence[int]) -> np.ndarray:
        """Hop distances from each source (1-indexed) to all vertices, shape ``(len(sources), n)``."""
        idx = np.asarray(sources, dtype=np.int64) - 1
        d = shortest_path(self.csr, unweighted=True, directed=False, indices=idx)
        return np.where(np.isinf(d), -1, d).astype(np.int64)

    @cached_property
    def diameter(self) -> int:
        best = 0
        for chunk in _chunks(range(1, self.n + 1), 256):
            best = max(best, int(self.distance_rows(chunk).max()))
        return best

    def without_edges(self, removed: Iterable[tuple[int, int]]) -> "Graph":
        drop = {(min(u, v), max(u, v)) for u, v in removed}
        return Graph.from_edges(self.n, [e for e in self.edges() if e not in drop], name=self.name)


def _chunks(it: Iterable[int], size: int):
    it = iter(it)
    while chunk := list(itertools.islice(it, size)):
        yield chunk


def make_grid(d: int, side: int) -> Graph:
    """The ``d``-dimensional grid with ``side`` vertices per axis (no wraparound)."""
    if d < 1 or side < 1:
        raise GraphError("need d >= 1 and side >= 1")
    if side ** d > MAX_VERTICES:
        raise GraphError(f"side^d = {side ** d} exceeds the size cap {MAX_VERTICES}")
    gc = GridCoords(d, side)
    coords = gc.coord_array()
    labels = np.arange(1, gc.n + 1)
    edges = []
    for j in range(d):
        step = side ** j
        ok = coords[:, j] < side - 1
        edges.append(np.stack([labels[ok], labels[ok] + step], axis=1))
    e = np.concatenate(edges) if edges else np.zeros((0, 2), int)
    return Graph.from_edges(gc.n, map(tuple, e.tolist()), grid=gc, name=f"grid(d={d},side={side})",
                            check_connected=False)


def make_starfish(M: int, leg_len: int) -> Graph:
    """Centre vertex 1 with ``M`` legs of ``leg_len`` vertices; leg ``j`` holds ``2+j*leg_len .. 1+(j+1)*leg_len``."""
    if M < 1 or leg_len < 1:
        raise GraphError("need M >= 1 and leg_len >= 1")
    edges = []
    for j in range(M):
        prev = 1
        for t in range(leg_len):
            v = 2 + j * leg_len + t
            edges.append((prev, v))
            prev = v
    return Graph.from_edges(1 + M * leg_len, edges, name=f"starfish(M={M},leg={leg_len})")


def starfish_legs(M: int, leg_len: int) -> list[list[int]]:
    return [[2 + j * leg_len + t for t in range(leg_len)] for j in range(M)]


def ball(g: Graph, v: int, radius: int) -> set[int]:
    dist = g.bfs(v)
    return {int(u) + 1 for u in np.flatnonzero((dist >= 0) & (dist <= radius))}


def dimension_constant(g: Graph, d: float, *, sample: int = 512, seed: int = 0) -> float:
    """Largest ``kappa`` with ``|B(v, l)| >= min(kappa * l**d, n)`` for every ``v`` and ``l >= 1``.

    Exhaustive for graphs up to ``EXHAUSTIVE_KAPPA_LIMIT`` vertices; above that a
    seeded sample of centres is used, which can only overestimate ``kappa``.
    Returns ``inf`` when every radius-1 ball already covers the graph.
    """
    if d < 1:
        raise GraphError("dimension must be >= 1")
    if g.n <= EXHAUSTIVE_KAPPA_LIMIT:
        centres = range(1, g.n + 1)
    else:
        rng = np.random.default_rng(seed)
        centres = sorted(rng.choice(np.arange(1, g.n + 1), size=sample, replace=False).tolist())
    kappa = math.inf
    for chunk in _chunks(centres, 256):
        dist = g.distance_rows(chunk)
        for row in dist:
            counts = np.bincount(row[row >= 0])
            sizes = np.cumsum(counts)
            radii = np.arange(len(sizes))
            open_ = (radii >= 1) & (sizes < g.n)
            if open_.any():
                kappa = min(kappa, float((sizes[open_] / radii[open_].astype(float) ** d).min()))
    return kappa


@dataclass(frozen=True)
class SpanningTree:
    root: int
    parent: dict[int, int]  # root maps to 0
    depth: dict[int, int]

    @property
    def height(self) -> int:
        return max(self.depth.values())

    def path_from_root(self, v: int) -> list[int]:
        path = [v]
        while path[-1] != self.root:
            path.append(self.parent[path[-1]])
        return path[::-1]


def min_height_spanning_tree(g: Graph, root: int) -> SpanningTree:
    """BFS tree; its height equals the eccentricity of ``root``."""
    parent, depth = {root: 0}, {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for w in g.neighbors(u):
                if w not in depth:
                    parent[w], depth[w] = u, depth[u] + 1
                    nxt.append(w)
        frontier = nxt
    return SpanningTree(root, parent, depth)


def dfs_walk(g: Graph, root: int = 1) -> list[int]:
    """Closed depth-first walk over the minimum-height spanning tree: ``2n-1`` vertices, ``2n-2`` moves."""
    tree = min_height_spanning_tree(g, root)
    children: dict[int, list[int]] = {v: [] for v in tree.parent}
    for v, p in tree.parent.items():
        if p:
            children[p].append(v)
    walk = [root]
    stack = [(root, iter(sorted(children[root])))]
    while stack:
        v, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            if stack:
                walk.append(stack[-1][0])
        else:
            walk.append(nxt)
            stack.append((nxt, iter(sorted(children[nxt]))))
    return walk


@dataclass(frozen=True)
class Segment:
    prefix: tuple[int, ...]  # shortest path root -> body start
    body: tuple[int, ...]  # consecutive slice of the DFS walk
    suffix: tuple[int, ...]  # shortest path body end -> root
    discovered: frozenset[int]  # vertices first seen by the DFS inside this body

    def walk(self) -> list[int]:
        return list(self.prefix) + list(self.body[1:]) + list(self.suffix[1:])

    def __len__(self) -> int:
        return len(self.walk()) - 1


@dataclass(frozen=True)
class SegmentSchedule:
    root: int
    delta: int
    segments: tuple[Segment, ...]

    def covered(self) -> set[int]:
        return set().union(*(s.body for s in self.segments))


def dfs_segments(g: Graph, delta: int, root: int = 1) -> SegmentSchedule:
    """Cut the closed DFS walk into bodies of ``delta`` moves, each wrapped by go-to and return paths."""
    if delta < 1 or delta > max(2 * g.n, 1):
        raise GraphError(f"segment length {delta} outside 1..2n")
    walk = dfs_walk(g, root)
    moves = len(walk) - 1
    count = max(1, math.ceil(moves / delta))
    tree = min_height_spanning_tree(g, root)
    first_seen: dict[int, int] = {}
    for t, v in enumerate(walk):
        first_seen.setdefault(v, t)
    segs = []
    for i in range(count):
        lo, hi = i * delta, min((i + 1) * delta, moves)
        body = tuple(walk[lo:hi + 1])
        # the start of body i is the end of body i-1; credit shared discoveries to the earlier one
        disc = frozenset(v for v, t in first_seen.items() if (lo < t <= hi) or (i == 0 and t == 0))
        segs.append(Segment(tuple(tree.path_from_root(body[0])), body,
                            tuple(tree.path_from_root(body[-1])[::-1]), disc))
    return SegmentSchedule(root, delta, tuple(segs))


def read_graph(path: str | Path) -> Graph:
    """Parse the text format: first line ``n``, then one ``u v`` edge per line (1-indexed)."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise GraphError(f"{path}: empty graph file")
    try:
        n = int(lines[0])
        edges = [tuple(int(t) for t in ln.split()) for ln in lines[1:]]
    except ValueError as exc:
        raise GraphError(f"{path}: {exc}") from None
    if any(len(e) != 2 for e in edges):
        raise GraphError(f"{path}: every edge line needs exactly two vertices")
    return Graph.from_edges(n, edges, name=Path(path).stem)


def write_graph(g: Graph, path: str | Path) -> None:
    body = "\n".join(f"{u} {v}" for u, v in g.edges())
    Path(path).write_text(f"{g.n}\n{body}\n")
