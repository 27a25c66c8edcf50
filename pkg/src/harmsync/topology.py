"""Directed graph of an interconnection and its connectedness test.

Edge ``(i, j)`` exists when oscillator ``i`` listens to oscillator ``j``.
A graph is connected when some node (a *witness*) can be reached by a
directed path from every other node.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .coupling import Interconnection

__all__ = ["DirectedGraph", "ConnectivityReport", "build_graph", "is_connected", "node_label"]


def node_label(i: int) -> str:
    return f"n{i + 1}"


@dataclass(frozen=True)
class DirectedGraph:
    p: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("a graph needs at least one node")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise ValueError(f"edge ({i}, {j}) out of range for p={self.p}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, p: int, edges: Iterable[tuple[int, int]]) -> "DirectedGraph":
        return cls(p, frozenset(edges))

    def successors(self) -> list[list[int]]:
        out = [[] for _ in range(self.p)]
        for i, j in sorted(self.edges):
            out[i].append(j)
        return out

    def predecessors(self) -> list[list[int]]:
        inc = [[] for _ in range(self.p)]
        for i, j in sorted(self.edges):
            inc[j].append(i)
        return inc


def _bfs(adjacency: list[list[int]], start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


@dataclass
class ConnectivityReport:
    connected: bool
    witnesses: list[int]
    counterexample: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "connected": self.connected,
            "witnesses": [node_label(w) for w in self.witnesses],
            "counterexample": (None if self.counterexample is None
                               else [node_label(n) for n in self.counterexample]),
        }


def build_graph(net: Interconnection) -> DirectedGraph:
    return DirectedGraph.from_edges(net.p, net.edges())


def is_connected(g: DirectedGraph) -> ConnectivityReport:
    """Decide connectedness by one reverse BFS per candidate witness.

    When the graph is not connected the report carries two nodes whose
    forward-reachable sets are disjoint; such a pair always exists because a
    disconnected graph has at least two sink components.
    """
    reverse = g.predecessors()
    witnesses = [w for w in range(g.p) if len(_bfs(reverse, w)) == g.p]
    if witnesses:
        return ConnectivityReport(True, witnesses)
    forward = g.successors()
    reach = [_bfs(forward, n) for n in range(g.p)]
    for a in range(g.p):
        for b in range(a + 1, g.p):
            if not reach[a] & reach[b]:
                return ConnectivityReport(False, [], (a, b))
    raise AssertionError("disconnected graph without a separating pair")  # unreachable
