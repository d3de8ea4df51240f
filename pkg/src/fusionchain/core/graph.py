"""Simple undirected graphs and the rewrites used by fusion networks.

Graphs are immutable values. Every rewrite (local complementation, pivot,
contraction, deletion) returns a new ``Graph`` and never renumbers the
vertices that survive it.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Set, Tuple

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


class GraphError(ValueError):
    """Raised for rewrites on unknown vertices, non-edges or infeasible sizes."""


def normalize_edge(u: int, v: int) -> Edge:
    """Return the edge {u, v} as an ordered pair with u < v."""
    if u == v:
        raise GraphError(f"Self-loop on vertex {u} is not allowed.")
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Simple undirected labeled graph.

    Attributes:
        vertices: Non-negative integer vertex ids.
        edges: Unordered pairs stored as ``(u, v)`` with ``u < v``.
    """

    vertices: FrozenSet[int] = frozenset()
    edges: FrozenSet[Edge] = frozenset()

    def __post_init__(self):
        """Check the simple-graph invariants."""
        for vertex in self.vertices:
            if vertex < 0:
                raise GraphError(f"Vertex ids must be non-negative, got {vertex}.")
        for u, v in self.edges:
            if u >= v:
                raise GraphError(f"Edge ({u}, {v}) is not normalized (need u < v).")
            if u not in self.vertices or v not in self.vertices:
                raise GraphError(f"Edge ({u}, {v}) has an endpoint outside the vertex set.")

    @classmethod
    def from_edges(cls, edges: Iterable[Tuple[int, int]], vertices: Iterable[int] = ()) -> "Graph":
        """Build a graph from arbitrary-orientation edges plus optional extra vertices."""
        normalized = frozenset(normalize_edge(u, v) for u, v in edges)
        all_vertices = set(vertices)
        for u, v in normalized:
            all_vertices.update((u, v))
        return cls(frozenset(all_vertices), normalized)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Graph":
        """Parse the ``{"vertices": [...], "edges": [[u, v], ...]}`` format."""
        try:
            vertices = [int(v) for v in data["vertices"]]
            edges = [(int(e[0]), int(e[1])) for e in data["edges"]]
        except (KeyError, TypeError, IndexError, ValueError) as e:
            raise GraphError(f"Malformed graph document: {e}") from e
        return cls.from_edges(edges, vertices)

    def to_dict(self) -> Dict[str, Any]:
        """Serialize to the JSON graph format with sorted ids and edges."""
        return {
            "vertices": self.sorted_vertices(),
            "edges": [list(e) for e in self.sorted_edges()],
        }

    @cached_property
    def adjacency(self) -> Dict[int, FrozenSet[int]]:
        """Neighbor sets for every vertex."""
        adj: Dict[int, Set[int]] = {v: set() for v in self.vertices}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return {v: frozenset(n) for v, n in adj.items()}

    def sorted_vertices(self) -> List[int]:
        return sorted(self.vertices)

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        return normalize_edge(u, v) in self.edges

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def _require_vertex(g: Graph, u: int) -> None:
    if u not in g.vertices:
        raise GraphError(f"Unknown vertex {u}.")


def _require_edge(g: Graph, u: int, v: int) -> None:
    _require_vertex(g, u)
    _require_vertex(g, v)
    if not g.has_edge(u, v):
        raise GraphError(f"({u}, {v}) is not an edge.")


def neighbors(g: Graph, u: int) -> FrozenSet[int]:
    """Return N(u).

    Raises:
        GraphError: If ``u`` is not a vertex of ``g``.
    """
    _require_vertex(g, u)
    return g.adjacency[u]


def local_complement(g: Graph, u: int) -> Graph:
    """Toggle every edge between neighbors of ``u`` (E △ K_N(u))."""
    nbrs = sorted(neighbors(g, u))
    toggled = {(a, b) for a, b in combinations(nbrs, 2)}
    return Graph(g.vertices, frozenset(g.edges.symmetric_difference(toggled)))


def pivot(g: Graph, u: int, v: int) -> Graph:
    """Pivot on the edge {u, v}, defined as ((g * u) * v) * u.

    Raises:
        GraphError: If {u, v} is not an edge.
    """
    _require_edge(g, u, v)
    return local_complement(local_complement(local_complement(g, u), v), u)


def contract_edge(g: Graph, u: int, v: int) -> Graph:
    """Merge ``v`` into ``u`` along the edge {u, v}; ``u`` keeps its id.

    Raises:
        GraphError: If {u, v} is not an edge.
    """
    _require_edge(g, u, v)
    merged = (g.adjacency[u] | g.adjacency[v]) - {u, v}
    kept = {e for e in g.edges if u not in e and v not in e}
    kept.update(normalize_edge(u, w) for w in merged)
    return Graph(g.vertices - {v}, frozenset(kept))


def delete_vertices(g: Graph, s: Iterable[int]) -> Graph:
    """Remove the vertices in ``s`` and every incident edge.

    Raises:
        GraphError: If ``s`` contains an unknown vertex.
    """
    removed = frozenset(s)
    unknown = removed - g.vertices
    if unknown:
        raise GraphError(f"Unknown vertices {sorted(unknown)}.")
    if not removed:
        return g
    edges = frozenset(e for e in g.edges if e[0] not in removed and e[1] not in removed)
    return Graph(g.vertices - removed, edges)


def relabel(g: Graph, mapping: Mapping[int, int]) -> Graph:
    """Rename vertices through ``mapping``; unmapped vertices keep their ids."""
    vertices = frozenset(mapping.get(v, v) for v in g.vertices)
    if len(vertices) != len(g.vertices):
        raise GraphError("Relabeling would merge distinct vertices.")
    edges = frozenset(normalize_edge(mapping.get(u, u), mapping.get(v, v)) for u, v in g.edges)
    return Graph(vertices, edges)


def union(first: Graph, second: Graph) -> Graph:
    """Vertex and edge union of two graphs."""
    return Graph(first.vertices | second.vertices, first.edges | second.edges)


def to_networkx(g: Graph) -> nx.Graph:
    """Convert to a networkx graph with sorted insertion order."""
    nxg = nx.Graph()
    nxg.add_nodes_from(g.sorted_vertices())
    nxg.add_edges_from(g.sorted_edges())
    return nxg


def connected_components(g: Graph) -> List[Set[int]]:
    """Maximal connected vertex sets ordered by their smallest vertex id."""
    components = [set(c) for c in nx.connected_components(to_networkx(g))]
    return sorted(components, key=min)


def is_connected(g: Graph) -> bool:
    """True for a non-empty graph with a single component."""
    return bool(g.vertices) and len(connected_components(g)) == 1


def _matching_size(edges: List[Edge]) -> int:
    if not edges:
        return 0
    nxg = nx.Graph()
    nxg.add_edges_from(edges)
    return len(nx.max_weight_matching(nxg, maxcardinality=True))


def maximum_matching(g: Graph) -> FrozenSet[Edge]:
    """Return the lexicographically smallest maximum-cardinality matching.

    The Blossom implementation in networkx fixes the optimum size; edges are
    then committed in sorted order whenever the rest of the graph can still
    complete a matching of that size.
    """
    edges = g.sorted_edges()
    target = _matching_size(edges)
    chosen: List[Edge] = []
    used: Set[int] = set()
    for i, (u, v) in enumerate(edges):
        if len(chosen) == target:
            break
        if u in used or v in used:
            continue
        blocked = used | {u, v}
        rest = [e for e in edges[i + 1 :] if e[0] not in blocked and e[1] not in blocked]
        if 1 + _matching_size(rest) >= target - len(chosen):
            chosen.append((u, v))
            used.update((u, v))
    return frozenset(chosen)


def random_connected_graph(m: int, n: int, seed: int) -> Graph:
    """Random connected simple graph with ``m`` vertices and ``n`` edges.

    A uniform random spanning tree (random Prüfer sequence) is extended by
    uniformly chosen non-edges until ``n`` edges exist.

    Raises:
        GraphError: If no connected simple graph with these sizes exists.
    """
    if m < 1:
        raise GraphError(f"Need at least one vertex, got m={m}.")
    if not (m - 1 <= n <= m * (m - 1) // 2):
        raise GraphError(f"No connected simple graph has {m} vertices and {n} edges.")

    rng = np.random.default_rng(seed)
    if m == 1:
        return Graph(frozenset({0}))
    if m == 2:
        tree_edges = [(0, 1)]
    else:
        sequence = [int(x) for x in rng.integers(0, m, size=m - 2)]
        tree_edges = [normalize_edge(u, v) for u, v in nx.from_prufer_sequence(sequence).edges]

    tree = set(tree_edges)
    candidates = [e for e in combinations(range(m), 2) if e not in tree]
    extra = n - (m - 1)
    picks = rng.choice(len(candidates), size=extra, replace=False) if extra else []
    edges = tree | {candidates[int(i)] for i in picks}
    logger.debug(f"Generated random graph G({m},{n}) with seed {seed}")
    return Graph(frozenset(range(m)), frozenset(edges))
