"""Undirected communication graphs and periodic graph schedules.

Agents are numbered 1..n. A static topology is a single Graph; a time-varying
one is a GraphSequence cycling through frames with a fixed period.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError

# Marker used in the distance matrix for vertex pairs with no connecting path.
UNREACHABLE = -1


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("graph needs at least one vertex")
        seen = set()
        normalized = []
        for edge in self.edges:
            if len(edge) != 2:
                raise ConfigError(f"bad edge {edge!r}")
            a, b = int(edge[0]), int(edge[1])
            if a == b:
                raise ConfigError(f"self-loop at vertex {a}")
            if not (1 <= a <= self.n and 1 <= b <= self.n):
                raise ConfigError(f"edge ({a}, {b}) outside 1..{self.n}")
            key = (min(a, b), max(a, b))
            if key not in seen:
                seen.add(key)
                normalized.append(key)
        object.__setattr__(self, "edges", tuple(sorted(normalized)))

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """neighbors[i-1] is the sorted tuple of vertices adjacent to i."""
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.edges:
            adj[a - 1].append(b)
            adj[b - 1].append(a)
        return tuple(tuple(sorted(x)) for x in adj)

    def degree(self, vertex: int) -> int:
        return len(self.neighbors[vertex - 1])


def distances(graph: Graph) -> np.ndarray:
    """All-pairs hop counts by BFS; UNREACHABLE where no path exists."""
    n = graph.n
    out = np.full((n, n), UNREACHABLE, dtype=np.int64)
    for start in range(n):
        out[start, start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in graph.neighbors[u]:
                v -= 1
                if out[start, v] == UNREACHABLE:
                    out[start, v] = out[start, u] + 1
                    queue.append(v)
    return out


def is_connected(graph: Graph) -> bool:
    if graph.n == 1:
        return True
    seen = {1}
    queue = deque([1])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors[u - 1]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == graph.n


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(1, n)))


def ring_graph(n: int) -> Graph:
    if n < 3:
        raise ConfigError("ring needs at least 3 vertices")
    return Graph(n, tuple((i, i + 1) for i in range(1, n)) + ((1, n),))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple((i, j) for i in range(1, n) for j in range(i + 1, n + 1)))


def random_tree(n: int, seed: int) -> Graph:
    """Uniform-attachment random tree: vertex k joins a uniformly chosen earlier vertex."""
    rng = np.random.default_rng(seed)
    edges = tuple((int(rng.integers(1, k)), k) for k in range(2, n + 1))
    return Graph(n, edges)


@dataclass(frozen=True)
class GraphSequence:
    """Periodic schedule of graph frames; frame at step t is frames[(t-1) % period]."""

    frames: tuple[Graph, ...]

    def __post_init__(self):
        if not self.frames:
            raise ConfigError("schedule needs at least one frame")
        n = self.frames[0].n
        for frame in self.frames:
            if frame.n != n:
                raise ConfigError("all frames must share the same vertex set")
        object.__setattr__(self, "frames", tuple(self.frames))

    @classmethod
    def static(cls, graph: Graph) -> "GraphSequence":
        return cls(frames=(graph,))

    @property
    def n(self) -> int:
        return self.frames[0].n

    @property
    def period(self) -> int:
        return len(self.frames)

    @property
    def is_static(self) -> bool:
        return len(self.frames) == 1

    def at(self, t: int) -> Graph:
        if t < 1:
            raise ConfigError(f"steps start at 1, got {t}")
        return self.frames[(t - 1) % self.period]


def union_graph(seq: GraphSequence) -> Graph:
    edges: set[tuple[int, int]] = set()
    for frame in seq.frames:
        edges.update(frame.edges)
    return Graph(seq.n, tuple(sorted(edges)))


def union_rooted_at(seq: GraphSequence, window_start: int, roots: Iterable[int]) -> bool:
    """True when every vertex can reach some root within one period's edge union.

    window_start picks where the period-long window begins; for a periodic
    schedule the union is the same for every start, but the parameter keeps
    the call sites explicit about which window they reason over.
    """
    roots = {int(r) for r in roots}
    if not roots:
        raise ConfigError("need at least one root")
    bad = [r for r in roots if not (1 <= r <= seq.n)]
    if bad:
        raise ConfigError(f"roots outside 1..{seq.n}: {bad}")
    edges: set[tuple[int, int]] = set()
    for t in range(window_start, window_start + seq.period):
        edges.update(seq.at(t).edges)
    union = Graph(seq.n, tuple(sorted(edges)))
    seen = set(roots)
    queue = deque(roots)
    while queue:
        u = queue.popleft()
        for v in union.neighbors[u - 1]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == seq.n
