"""Fusion networks (H, F) for Type-I and Type-II fusion.

A network stores one graph ``h`` holding both the physical entanglement and
the pending fusion edges. The physical graph state is ``h`` without the
fusion edges. Target vertices are tracked through ``labels``: exactly one
network vertex per target vertex carries its label.

Type-I networks use 2-qubit linear clusters and fusion success contracts the
fusion edge. Type-II networks use 3-qubit linear clusters; success pivots on
the fusion edge and deletes both endpoints. Leaves of Type-II clusters that
never receive a label are kept in ``pool`` and measured out at the end.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx

from fusionchain.config import FUSION_TYPE_CONFIG
from fusionchain.core.graph import (
    Edge,
    Graph,
    GraphError,
    contract_edge,
    delete_vertices,
    is_connected,
    normalize_edge,
    pivot,
    relabel,
)

logger = logging.getLogger(__name__)


class NetworkError(ValueError):
    """Raised for invalid targets, edge orders or unregistered fusions."""


class FusionType(str, Enum):
    """Fusion gate family; the value is the CLI / JSON spelling."""

    TYPE_I = "t1"
    TYPE_II = "t2"

    @property
    def label(self) -> str:
        return FUSION_TYPE_CONFIG[self.value]["label"]

    @property
    def cluster_size(self) -> int:
        return FUSION_TYPE_CONFIG[self.value]["cluster_size"]

    @property
    def discard_below(self) -> int:
        return FUSION_TYPE_CONFIG[self.value]["discard_below"]


@dataclass(frozen=True)
class FailureRecord:
    """What a failed fusion destroyed, kept until the network is rebuilt.

    Attributes:
        previous: The network right before the failed fusion.
        fusion: The failed fusion edge.
        z_measured: Endpoint removed by a Z measurement.
        x_measured: Endpoint measured in X (Type-II only).
    """

    previous: "FusionNetwork"
    fusion: Edge
    z_measured: int
    x_measured: Optional[int] = None


@dataclass(frozen=True)
class FusionNetwork:
    """Fusion network (H, F) with target labels.

    Attributes:
        h: Physical edges plus fusion edges.
        fusions: Pending fusion edges in application order.
        labels: Injective map from network vertex to target vertex.
        ftype: Fusion type of every fusion in the network.
        pool: Unlabeled spare Type-II qubits.
        next_id: Next unused vertex id for inserted resource states.
        edge_order: Target edges in the traversal order the network was built
            from; Type-II rebuilds re-traverse the edges they must recreate.
        failure: Set by ``fuse_failure`` until the network is rebuilt.
    """

    h: Graph
    fusions: Tuple[Edge, ...]
    labels: Mapping[int, int]
    ftype: FusionType
    pool: FrozenSet[int] = frozenset()
    next_id: int = 0
    edge_order: Tuple[Edge, ...] = ()
    failure: Optional[FailureRecord] = field(default=None, compare=False)

    def __post_init__(self):
        """Check the structural invariants of (H, F)."""
        if len(set(self.fusions)) != len(self.fusions):
            raise NetworkError("Fusion list contains duplicates.")
        for f in self.fusions:
            if f not in self.h.edges:
                raise NetworkError(f"Fusion {f} is not an edge of H.")
        if len(set(self.labels.values())) != len(self.labels):
            raise NetworkError("Labels must be injective.")
        unknown = (set(self.labels) | set(self.pool)) - self.h.vertices
        if unknown:
            raise NetworkError(f"Labels or pool reference unknown vertices {sorted(unknown)}.")
        if set(self.labels) & self.pool:
            raise NetworkError("Pool vertices cannot carry labels.")
        if self.ftype is FusionType.TYPE_II:
            endpoints: Set[int] = set()
            for u, v in self.fusions:
                if u in endpoints or v in endpoints:
                    raise NetworkError("Type-II fusion edges must be pairwise non-adjacent.")
                endpoints.update((u, v))
        if self.h.vertices and self.next_id <= max(self.h.vertices):
            raise NetworkError("next_id must exceed every vertex id in use.")

    @cached_property
    def physical(self) -> Graph:
        """The current graph state: H without the fusion edges."""
        return Graph(self.h.vertices, self.h.edges - frozenset(self.fusions))

    def to_dict(self) -> Dict[str, Any]:
        """Serialize to the network JSON format."""
        doc = self.h.to_dict()
        doc["fusions"] = [list(f) for f in self.fusions]
        doc["labels"] = {str(v): t for v, t in sorted(self.labels.items())}
        doc["ftype"] = self.ftype.value
        doc["pool"] = sorted(self.pool)
        doc["edge_order"] = [list(e) for e in self.edge_order]
        return doc

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FusionNetwork":
        """Parse the network JSON format written by ``to_dict``."""
        try:
            h = Graph.from_dict(data)
            fusions = tuple(normalize_edge(int(f[0]), int(f[1])) for f in data["fusions"])
            labels = {int(v): int(t) for v, t in data["labels"].items()}
            ftype = FusionType(data["ftype"])
            pool = frozenset(int(v) for v in data.get("pool", []))
            order = tuple((int(e[0]), int(e[1])) for e in data.get("edge_order", []))
        except (KeyError, TypeError, IndexError, ValueError) as e:
            raise NetworkError(f"Malformed network document: {e}") from e
        next_id = max(h.vertices, default=-1) + 1
        return cls(h, fusions, labels, ftype, pool, next_id, order)


def make_network(
    physical: Graph,
    fusions: Sequence[Edge],
    labels: Mapping[int, int],
    ftype: FusionType,
    pool: Iterable[int] = (),
    next_id: int = 0,
    failure: Optional[FailureRecord] = None,
    edge_order: Sequence[Edge] = (),
) -> FusionNetwork:
    """Assemble a network from its physical graph and fusion list."""
    fusion_edges = tuple(normalize_edge(u, v) for u, v in fusions)
    overlap = physical.edges & frozenset(fusion_edges)
    if overlap:
        raise NetworkError(f"Fusion edges {sorted(overlap)} coincide with physical edges.")
    h = Graph(physical.vertices, physical.edges | frozenset(fusion_edges))
    next_id = max(next_id, max(h.vertices, default=-1) + 1)
    return FusionNetwork(
        h, fusion_edges, dict(labels), ftype, frozenset(pool), next_id, tuple(edge_order), failure
    )


@dataclass
class Assembly:
    """Output of the edge-traversal construction before it becomes a network."""

    vertices: Set[int]
    edges: Set[Edge]
    fusions: List[Edge]
    position: Dict[int, int]
    pool: Set[int]
    next_id: int


def assemble(
    edge_order: Sequence[Tuple[int, int]],
    ftype: FusionType,
    next_id: int = 0,
    isolated: Iterable[int] = (),
    placed: Optional[Mapping[int, int]] = None,
) -> Assembly:
    """Traverse target edges and add one resource state per case.

    ``position`` maps each target vertex to the network vertex carrying its
    label. For Type-I that is the first copy created, while new clusters are
    fused onto the most recent copy. Target vertices listed in ``isolated``
    that appear in no edge get a single fresh qubit. ``placed`` seeds the
    positions with qubits that already exist outside the assembly.
    """
    out = Assembly(set(), set(), [], dict(placed or {}), set(), next_id)
    pool_owner: Dict[int, int] = {}
    tip: Dict[int, int] = dict(out.position)

    def fresh(count: int) -> List[int]:
        ids = list(range(out.next_id, out.next_id + count))
        out.next_id += count
        out.vertices.update(ids)
        return ids

    def chain(ids: Sequence[int]) -> None:
        for u, v in zip(ids, ids[1:]):
            out.edges.add(normalize_edge(u, v))

    pos = out.position
    for a, b in edge_order:
        if ftype is FusionType.TYPE_I:
            x1, x2 = fresh(2)
            chain((x1, x2))
            if a in tip:
                out.fusions.append(normalize_edge(tip[a], x1))
            if b in tip:
                out.fusions.append(normalize_edge(tip[b], x2))
            pos.setdefault(a, x1)
            pos.setdefault(b, x2)
            tip[a], tip[b] = x1, x2
            continue

        if a in pos and b in pos:
            y1, y2, y3, z1, z2, z3 = fresh(6)
            chain((y1, y2, y3))
            chain((z1, z2, z3))
            out.fusions += [
                normalize_edge(pos[a], y1),
                normalize_edge(y3, z1),
                normalize_edge(pos[b], z3),
            ]
            pos[a], pos[b] = y2, z2
        elif a in pos or b in pos:
            old, new = (a, b) if a in pos else (b, a)
            spare = sorted(u for u in out.pool if pool_owner[u] == old)
            if spare:
                pos[new] = spare[0]
                out.pool.discard(spare[0])
            else:
                y1, y2, y3 = fresh(3)
                chain((y1, y2, y3))
                out.fusions.append(normalize_edge(pos[old], y1))
                pos[old], pos[new] = y2, y3
        else:
            y1, y2, y3 = fresh(3)
            chain((y1, y2, y3))
            pos[a], pos[b] = y1, y2
            out.pool.add(y3)
            pool_owner[y3] = b

    for t in sorted(isolated):
        if t not in pos:
            (x,) = fresh(1)
            pos[t] = x
    return out


def build_network(
    g: Graph, ftype: FusionType, edge_order: Optional[Sequence[Tuple[int, int]]] = None
) -> FusionNetwork:
    """Generate a fusion network for the target graph ``g``.

    Args:
        g: Connected target graph with at least two vertices.
        ftype: Fusion type to build for.
        edge_order: Traversal order, a permutation of ``g.edges`` (either
            orientation). Defaults to sorted order.

    Raises:
        NetworkError: If ``g`` is disconnected or ``edge_order`` is not a
            permutation of its edges.
    """
    if len(g.vertices) < 2 or not is_connected(g):
        raise NetworkError("Target graph must be connected with at least two vertices.")
    order = list(edge_order) if edge_order is not None else g.sorted_edges()
    try:
        normalized = [normalize_edge(u, v) for u, v in order]
    except GraphError as e:
        raise NetworkError(f"Invalid edge order: {e}") from e
    if len(normalized) != len(g.edges) or set(normalized) != g.edges:
        raise NetworkError("Edge order must be a permutation of the target edges.")

    out = assemble(order, ftype)
    physical = Graph(frozenset(out.vertices), frozenset(out.edges))
    labels = {vertex: target for target, vertex in out.position.items()}
    traversal = [(u, v) for u, v in order]
    net = make_network(
        physical, out.fusions, labels, ftype, out.pool, out.next_id, edge_order=traversal
    )
    logger.debug(
        f"Built {ftype.label} network from {ftype.cluster_size}-qubit clusters: "
        f"{len(out.vertices)} qubits, {len(out.fusions)} fusions"
    )
    return net


def _require_fusion(net: FusionNetwork, f: Tuple[int, int]) -> Edge:
    try:
        edge = normalize_edge(*f)
    except GraphError as e:
        raise NetworkError(str(e)) from e
    if edge not in net.fusions:
        raise NetworkError(f"{edge} is not a registered fusion.")
    return edge


def drop_isolated_pool(net: FusionNetwork) -> FusionNetwork:
    """Remove pool qubits that no longer touch anything."""
    lonely = {v for v in net.pool if not net.h.adjacency[v]}
    if not lonely:
        return net
    return make_network(
        delete_vertices(net.physical, lonely),
        net.fusions,
        net.labels,
        net.ftype,
        net.pool - lonely,
        net.next_id,
        net.failure,
        net.edge_order,
    )


def fuse_success(net: FusionNetwork, f: Tuple[int, int]) -> FusionNetwork:
    """Apply a successful fusion.

    Type-I contracts the fusion edge and the labeled endpoint (or the smaller
    id) survives. Type-II pivots on the fusion edge and deletes both ends.

    Raises:
        NetworkError: If ``f`` is not a pending fusion.
    """
    edge = _require_fusion(net, f)
    rest = [e for e in net.fusions if e != edge]
    with_fusion = Graph(net.h.vertices, net.physical.edges | {edge})
    u, v = edge

    if net.ftype is FusionType.TYPE_I:
        if u in net.labels and v in net.labels:
            raise NetworkError(f"Fusion {edge} joins two labeled vertices.")
        keep, drop = (v, u) if v in net.labels else (u, v)
        physical = contract_edge(with_fusion, keep, drop)
        renamed: List[Edge] = []
        for a, b in rest:
            e = normalize_edge(keep if a == drop else a, keep if b == drop else b)
            if e not in renamed:
                renamed.append(e)
        labels = dict(net.labels)
        if drop in labels:
            labels[keep] = labels.pop(drop)
        return make_network(
            physical, renamed, labels, net.ftype, net.pool, net.next_id, edge_order=net.edge_order
        )

    physical = delete_vertices(pivot(with_fusion, u, v), {u, v})
    labels = {k: t for k, t in net.labels.items() if k not in edge}
    pool = net.pool - {u, v}
    result = make_network(
        physical, rest, labels, net.ftype, pool, net.next_id, edge_order=net.edge_order
    )
    return drop_isolated_pool(result)


def x_measured_endpoint(net: FusionNetwork, f: Edge) -> int:
    """Type-II convention: the endpoint with fewer non-pool neighbors, ties by id."""
    u, v = f
    phys = net.physical

    def load(x: int) -> Tuple[int, int]:
        return (len(phys.adjacency[x] - net.pool), x)

    return min(u, v, key=load)


def fuse_failure(net: FusionNetwork, f: Tuple[int, int]) -> FusionNetwork:
    """Apply a failed fusion and attach a ``FailureRecord`` for the rebuild.

    Type-I removes both endpoints. Type-II deletes the Z-measured endpoint,
    pivots the X-measured endpoint with its smallest neighbor and deletes it.
    Pending fusions touching a removed vertex leave the fusion list.

    Raises:
        NetworkError: If ``f`` is not a pending fusion.
    """
    edge = _require_fusion(net, f)
    u, v = edge

    if net.ftype is FusionType.TYPE_I:
        physical = delete_vertices(net.physical, {u, v})
        record = FailureRecord(previous=net, fusion=edge, z_measured=u)
        removed = {u, v}
    else:
        x = x_measured_endpoint(net, edge)
        z = v if x == u else u
        physical = delete_vertices(net.physical, {z})
        nbrs = physical.adjacency[x]
        if nbrs:
            physical = pivot(physical, x, min(nbrs))
        physical = delete_vertices(physical, {x})
        record = FailureRecord(previous=net, fusion=edge, z_measured=z, x_measured=x)
        removed = {x, z}

    rest = [e for e in net.fusions if e[0] not in removed and e[1] not in removed]
    labels = {k: t for k, t in net.labels.items() if k not in removed}
    pool = net.pool - removed
    return make_network(
        physical, rest, labels, net.ftype, pool, net.next_id, record, net.edge_order
    )


def finalize(net: FusionNetwork) -> Graph:
    """Measure out the pool and return the remaining physical graph."""
    return delete_vertices(net.physical, net.pool)


def matches_target(physical: Graph, labels: Mapping[int, int], target: Graph) -> bool:
    """True iff ``physical`` relabeled through ``labels`` equals ``target``."""
    if set(labels) != set(physical.vertices):
        return False
    if set(labels.values()) != set(target.vertices):
        return False
    try:
        return relabel(physical, labels) == target
    except GraphError:
        return False


def validate_network(net: FusionNetwork, target: Graph, ftype: FusionType) -> bool:
    """Apply every fusion successfully in list order and compare with ``target``."""
    if net.ftype is not ftype:
        return False
    current = net
    try:
        for f in net.fusions:
            current = fuse_success(current, f)
    except (NetworkError, GraphError) as e:
        logger.debug(f"Network rejected while fusing: {e}")
        return False
    final = finalize(current)
    labels = {v: t for v, t in current.labels.items() if v in final.vertices}
    return matches_target(final, labels, target)


def fusion_owner_classes(net: FusionNetwork) -> Dict[int, Optional[int]]:
    """Map each vertex to the target vertex its copy class will become.

    Type-I copies of a target vertex are linked by fusion edges, so each
    component of (V, F) carries one label. Type-II networks only report the
    labels themselves.
    """
    if net.ftype is FusionType.TYPE_II:
        return {v: net.labels.get(v) for v in net.h.vertices}
    fusion_graph = nx.Graph()
    fusion_graph.add_nodes_from(sorted(net.h.vertices))
    fusion_graph.add_edges_from(net.fusions)
    owners: Dict[int, Optional[int]] = {}
    for component in nx.connected_components(fusion_graph):
        found = [net.labels[v] for v in component if v in net.labels]
        owner = found[0] if len(found) == 1 else None
        for v in component:
            owners[v] = owner
    return owners
