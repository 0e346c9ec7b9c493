"""
Graph representation, ingestion, all-pairs shortest paths and synthetic graphs.

Graphs are simple, undirected, connected and immutable. Node ids are compacted
to 0..N-1 in order of first appearance in the source file.
"""

import heapq
import os
import xml.etree.ElementTree as ET
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import ArgumentError, ParseError, ValidationError
from .utils import atomic_write_text, make_rng

Edge = Tuple[int, int]

EDGE_LIST = "edge_list"
GRAPHML_SUBSET = "graphml_subset"


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected connected graph."""

    node_count: int
    edges: Tuple[Edge, ...]
    adjacency: np.ndarray = field(compare=False, repr=False)

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[Sequence[int]]) -> "Graph":
        """Validate and build a graph; edges are normalized to u < v and sorted."""
        if node_count < 2:
            raise ValidationError(f"graph needs at least 2 nodes, got {node_count}")
        normalized = set()
        for pair in edges:
            u, v = int(pair[0]), int(pair[1])
            if u == v:
                raise ValidationError(f"self-loop at node {u}")
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValidationError(f"edge ({u}, {v}) references a node outside 0..{node_count - 1}")
            key = (min(u, v), max(u, v))
            if key in normalized:
                raise ValidationError(f"duplicate edge {key}")
            normalized.add(key)

        adjacency = np.zeros((node_count, node_count), dtype=bool)
        for u, v in normalized:
            adjacency[u, v] = True
            adjacency[v, u] = True
        adjacency.setflags(write=False)

        graph = cls(node_count=node_count, edges=tuple(sorted(normalized)), adjacency=adjacency)
        if not graph.is_connected():
            raise ValidationError("graph is disconnected")
        return graph

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, node: int) -> List[int]:
        return [int(v) for v in np.flatnonzero(self.adjacency[node])]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def edge_index(self) -> Tuple[np.ndarray, np.ndarray]:
        """Directed (source, target) arrays holding both directions of every edge."""
        if not self.edges:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        u = np.array([e[0] for e in self.edges], dtype=np.int64)
        v = np.array([e[1] for e in self.edges], dtype=np.int64)
        return np.concatenate([u, v]), np.concatenate([v, u])

    def is_connected(self) -> bool:
        seen = np.zeros(self.node_count, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            node = queue.popleft()
            for nxt in np.flatnonzero(self.adjacency[node] & ~seen):
                seen[nxt] = True
                queue.append(int(nxt))
        return bool(seen.all())

    def relabel(self, permutation: Sequence[int]) -> "Graph":
        """Graph with node i renamed to permutation[i]."""
        perm = [int(p) for p in permutation]
        return Graph.from_edges(self.node_count, [(perm[u], perm[v]) for u, v in self.edges])


@dataclass(frozen=True)
class DistanceMatrix:
    """All-pairs hop distances of a connected graph."""

    d: np.ndarray

    @property
    def node_count(self) -> int:
        return int(self.d.shape[0])

    def pairs(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unordered pairs i < j with their distances."""
        i, j = np.triu_indices(self.node_count, k=1)
        return i, j, self.d[i, j].astype(float)


def shortest_paths(g: Graph) -> DistanceMatrix:
    """BFS from every source; O(N·(N+M))."""
    n = g.node_count
    neighbors = [g.neighbors(v) for v in range(n)]
    d = np.full((n, n), -1, dtype=np.int64)
    for source in range(n):
        row = d[source]
        row[source] = 0
        queue = deque([source])
        while queue:
            v = queue.popleft()
            for u in neighbors[v]:
                if row[u] >= 0:
                    continue
                row[u] = row[v] + 1
                queue.append(u)
    d.setflags(write=False)
    return DistanceMatrix(d=d)


def _compact(ids: Iterable[str], mapping: Dict[str, int]) -> None:
    for node_id in ids:
        if node_id not in mapping:
            mapping[node_id] = len(mapping)


def parse_edge_list(text: str) -> Graph:
    """Parse the edge_list format: header "N M" then M lines "u v"."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        lines.append((lineno, line.split()))

    if not lines:
        raise ParseError("empty edge list")
    lineno, header = lines[0]
    if len(header) != 2:
        raise ParseError(f"line {lineno}: expected header 'N M', got {' '.join(header)!r}")
    try:
        node_count, edge_count = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError(f"line {lineno}: header must be two integers") from None
    if edge_count != len(lines) - 1:
        raise ParseError(f"header declares {edge_count} edges but file has {len(lines) - 1}")

    raw_edges = []
    for lineno, parts in lines[1:]:
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'u v', got {' '.join(parts)!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"line {lineno}: node ids must be integers") from None
        if not (0 <= u < node_count and 0 <= v < node_count):
            raise ValidationError(f"line {lineno}: node id outside 0..{node_count - 1}")
        if u == v:
            raise ValidationError(f"line {lineno}: self-loop at node {u}")
        raw_edges.append((parts[0], parts[1]))

    mapping: Dict[str, int] = {}
    for u, v in raw_edges:
        _compact((str(int(u)), str(int(v))), mapping)
    if node_count >= 2 and len(mapping) < node_count:
        raise ValidationError(f"graph is disconnected: {node_count - len(mapping)} isolated node(s)")
    edges = [(mapping[str(int(u))], mapping[str(int(v))]) for u, v in raw_edges]
    return Graph.from_edges(node_count, edges)


def parse_graphml_subset(text: str) -> Graph:
    """Parse <node id=...> and <edge source=... target=...>; everything else is ignored."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        raise ParseError(f"malformed XML: {e}") from None

    mapping: Dict[str, int] = {}
    edge_ids: List[Tuple[str, str]] = []
    for element in root.iter():
        tag = element.tag.rsplit('}', 1)[-1]
        if tag == 'node':
            node_id = element.get('id')
            if node_id is None:
                raise ParseError("<node> without id")
            _compact([node_id], mapping)
        elif tag == 'edge':
            source, target = element.get('source'), element.get('target')
            if source is None or target is None:
                raise ParseError("<edge> without source/target")
            edge_ids.append((source, target))

    for source, target in edge_ids:
        if source not in mapping or target not in mapping:
            raise ParseError(f"edge ({source}, {target}) references an undeclared node")
    return Graph.from_edges(len(mapping), [(mapping[s], mapping[t]) for s, t in edge_ids])


def load_graph(path: Union[str, os.PathLike], format: str = EDGE_LIST) -> Graph:
    """Load and validate a graph file in the declared format."""
    try:
        with open(path, 'r') as f:
            text = f.read()
    except OSError as e:
        raise ParseError(f"cannot read graph file {path}: {e}") from None
    if format == EDGE_LIST:
        return parse_edge_list(text)
    if format == GRAPHML_SUBSET:
        return parse_graphml_subset(text)
    raise ArgumentError(f"unknown graph format: {format}")


def format_edge_list(g: Graph) -> str:
    lines = [f"{g.node_count} {g.edge_count}"]
    lines.extend(f"{u} {v}" for u, v in g.edges)
    return "\n".join(lines) + "\n"


def save_graph(g: Graph, path: Union[str, os.PathLike]) -> None:
    atomic_write_text(path, format_edge_list(g))


def _prufer_tree(n: int, rng: np.random.Generator) -> List[Edge]:
    """Uniform random labelled tree on n nodes via a random Prüfer sequence."""
    if n == 2:
        return [(0, 1)]
    sequence = [int(x) for x in rng.integers(0, n, size=n - 2)]
    degree = [1] * n
    for node in sequence:
        degree[node] += 1
    leaves = [node for node in range(n) if degree[node] == 1]
    heapq.heapify(leaves)
    edges = []
    for node in sequence:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, node), max(leaf, node)))
        degree[node] -= 1
        if degree[node] == 1:
            heapq.heappush(leaves, node)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((min(u, v), max(u, v)))
    return edges


def random_graph(
    n: Union[int, Tuple[int, int]],
    extra_edge_fraction: float = 0.0,
    seed: int = 0,
) -> Graph:
    """
    Random connected graph: uniform spanning tree plus extra non-tree edges.

    Args:
        n: node count, or an inclusive (n_min, n_max) range sampled uniformly
        extra_edge_fraction: extra edges as a fraction of the tree's N-1 edges
        seed: PCG64 seed; identical seeds give identical graphs
    """
    rng = make_rng(seed, "random_graph")
    if isinstance(n, tuple):
        n_min, n_max = n
        if n_min > n_max:
            raise ArgumentError(f"empty node range {n}")
        n = int(rng.integers(n_min, n_max + 1))
    if n < 2:
        raise ArgumentError(f"n must be at least 2, got {n}")
    if extra_edge_fraction < 0:
        raise ArgumentError("extra_edge_fraction must be non-negative")

    extra = int(np.floor(extra_edge_fraction * (n - 1) + 1e-9))
    available = n * (n - 1) // 2 - (n - 1)
    if extra > available:
        raise ArgumentError(f"{extra} extra edges requested but only {available} non-tree pairs exist")

    tree = _prufer_tree(n, rng)
    if extra:
        in_tree = set(tree)
        candidates = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in in_tree]
        picks = rng.choice(len(candidates), size=extra, replace=False)
        tree = tree + [candidates[int(i)] for i in sorted(picks)]
    return Graph.from_edges(n, tree)


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def grid_graph(rows: int, cols: int) -> Graph:
    edges = []
    for r in range(rows):
        for c in range(cols):
            node = r * cols + c
            if c + 1 < cols:
                edges.append((node, node + 1))
            if r + 1 < rows:
                edges.append((node, node + cols))
    return Graph.from_edges(rows * cols, edges)


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n)])
