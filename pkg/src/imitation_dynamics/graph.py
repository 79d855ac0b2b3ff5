"""Undirected simple graphs: representation, edge-list ingestion, generators."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

import numpy as np


class EdgeListParseError(ValueError):
    """Malformed edge-list input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes 0..n-1 with sorted neighbor lists.

    Immutable after construction; safe to share across workers. Symmetry,
    absence of self-loops and duplicate neighbors are enforced on build.
    """

    n: int
    neighbors: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("node count must be non-negative")
        if len(self.neighbors) != self.n:
            raise ValueError("neighbor table length does not match node count")
        for i, nbrs in enumerate(self.neighbors):
            if any(j < 0 or j >= self.n for j in nbrs):
                raise ValueError(f"node {i}: neighbor index out of range")
            if i in nbrs:
                raise ValueError(f"node {i}: self-loop")
            if list(nbrs) != sorted(set(nbrs)):
                raise ValueError(f"node {i}: neighbors must be sorted and unique")
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                if i not in self.neighbors[j]:
                    raise ValueError(f"asymmetric adjacency: {i}->{j} without {j}->{i}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build from an iterable of (i, j) pairs; duplicates collapse."""
        adj: list[set[int]] = [set() for _ in range(n)]
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            adj[i].add(j)
            adj[j].add(i)
        return cls(n, tuple(tuple(sorted(s)) for s in adj))

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(nbrs) for nbrs in self.neighbors], dtype=np.int64)

    @property
    def num_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.neighbors) // 2

    def edges(self) -> Iterator[tuple[int, int]]:
        """Yield each undirected edge once, as (i, j) with i < j."""
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                if i < j:
                    yield (i, j)

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Adjacency in CSR form (indptr, indices), both int64."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        for i, nbrs in enumerate(self.neighbors):
            indptr[i + 1] = indptr[i] + len(nbrs)
        indices = np.fromiter(
            (j for nbrs in self.neighbors for j in nbrs), dtype=np.int64, count=indptr[-1]
        )
        return indptr, indices


def load_edge_list(source: str | TextIO) -> tuple[Graph, tuple[str, ...]]:
    """Parse an edge list: one edge per line, two whitespace-separated identifiers.

    Lines starting with '#' and blank lines are ignored. Node indices are
    assigned by first appearance; duplicate edges collapse. Returns the graph
    and the identifier table (index -> identifier).
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    index: dict[str, int] = {}
    edges: set[tuple[int, int]] = set()
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListParseError(
                line_no, f"expected two node identifiers, got {len(tokens)}"
            )
        u, v = tokens
        if u == v:
            raise EdgeListParseError(line_no, f"self-loop at node {u!r}")
        for t in (u, v):
            if t not in index:
                index[t] = len(index)
        i, j = index[u], index[v]
        edges.add((min(i, j), max(i, j)))
    labels = tuple(index)  # insertion order == index order
    return Graph.from_edges(len(labels), sorted(edges)), labels


def write_edge_list(g: Graph, labels: tuple[str, ...] | None = None) -> str:
    """Serialize to the edge-list text format accepted by load_edge_list."""
    if labels is None:
        labels = tuple(str(i) for i in range(g.n))
    if len(labels) != g.n:
        raise ValueError("label table length does not match node count")
    return "".join(f"{labels[i]} {labels[j]}\n" for i, j in g.edges())


def complete_graph(n: int) -> Graph:
    """K_n: every pair of distinct nodes adjacent."""
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got {n}")
    return Graph(n, tuple(tuple(j for j in range(n) if j != i) for i in range(n)))


def random_graph(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p): each unordered pair included independently.

    Reproducible for a fixed seed.
    """
    if n < 1:
        raise ValueError(f"random graph needs n >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    ii, jj = np.triu_indices(n, k=1)
    mask = rng.random(ii.size) < p
    return Graph.from_edges(n, zip(ii[mask].tolist(), jj[mask].tolist()))
