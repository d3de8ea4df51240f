"""Adaptive graph-state generation protocol.

Fusions are applied one at a time from the head of the network's fusion
list. A failed fusion is repaired in place: usable leftover components are
kept, the destroyed part is rebuilt from fresh resource states and fused
back on.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from fusionchain.core.graph import (
    Edge,
    Graph,
    connected_components,
    delete_vertices,
    normalize_edge,
    relabel,
    union,
)
from fusionchain.core.network import (
    FusionNetwork,
    FusionType,
    NetworkError,
    assemble,
    finalize,
    fuse_failure,
    fuse_success,
    make_network,
    matches_target,
)
from fusionchain.core.optimizer import apply_ordering, order_fusions

logger = logging.getLogger(__name__)


class Outcome(str, Enum):
    """Result of one fusion attempt."""

    SUCCESS = "success"
    FAILURE = "failure"


@dataclass(frozen=True)
class ProtocolState:
    """One intermediate stage of the buildup.

    Attributes:
        net: Current fusion network; its fusion list is the pending order.
        target: Graph the protocol is building.
        done: True once every fusion succeeded and the target exists.
    """

    net: FusionNetwork
    target: Graph
    done: bool = False

    @property
    def pending(self) -> Tuple[Edge, ...]:
        return self.net.fusions


def _finish(net: FusionNetwork, target: Graph) -> FusionNetwork:
    final = finalize(net)
    labels = {v: t for v, t in net.labels.items() if v in final.vertices}
    if not matches_target(final, labels, target):
        raise RuntimeError("All fusions applied but the physical graph differs from the target.")
    return make_network(final, (), labels, net.ftype, (), net.next_id, edge_order=net.edge_order)


def initial_state(net: FusionNetwork, target: Graph) -> ProtocolState:
    """Wrap a freshly built network; a fusion-free network is already done."""
    if net.fusions:
        return ProtocolState(net, target)
    return ProtocolState(_finish(net, target), target, done=True)


def _rebuild_type_one(net: FusionNetwork) -> FusionNetwork:
    record = net.failure
    prev = record.previous
    v1, v2 = record.fusion
    phys = prev.physical
    leftover = delete_vertices(phys, {v1, v2})

    rebuild_edges: List[Edge] = []
    recreated: Set[int] = {v1, v2}
    attach: List[Tuple[int, int]] = []
    next_id = prev.next_id

    for component in connected_components(leftover):
        destroyed = sorted(
            (c, w) for c in component for w in phys.adjacency[c] if w in (v1, v2)
        )
        if len(component) == 1 and destroyed:
            c, w = destroyed.pop(0)
            rebuild_edges.append(normalize_edge(c, w))
            recreated.add(c)
            leftover = delete_vertices(leftover, {c})
        for c, w in destroyed:
            x, next_id = next_id, next_id + 1
            rebuild_edges.append(normalize_edge(w, x))
            attach.append((c, x))

    sub = assemble(sorted(rebuild_edges), FusionType.TYPE_I, next_id, isolated=recreated)
    rename = {sub.position[t]: t for t in recreated}
    sub_physical = relabel(Graph(frozenset(sub.vertices), frozenset(sub.edges)), rename)
    sub_fusions = [normalize_edge(rename.get(a, a), rename.get(b, b)) for a, b in sub.fusions]
    attach_fusions = [normalize_edge(c, sub.position[x]) for c, x in attach]
    remaining = [f for f in prev.fusions if f != record.fusion]

    pending = sub_fusions + attach_fusions + [record.fusion] + remaining
    logger.debug(
        f"Type-I rebuild of {record.fusion}: {len(rebuild_edges)} edges rebuilt, "
        f"{len(recreated) - 2} components discarded"
    )
    return make_network(
        union(leftover, sub_physical),
        pending,
        prev.labels,
        prev.ftype,
        (),
        sub.next_id,
        edge_order=prev.edge_order,
    )


def _target_pieces(
    leftover: Graph, labels: Dict[int, int], target: Graph, min_size: int
) -> List[Set[int]]:
    """Labeled components of ``leftover`` that already equal their part of the target.

    Unlabeled qubits are measured out first. A component is kept when it has
    at least ``min_size`` qubits and its edges are exactly the target edges
    between its labels.
    """
    labeled = delete_vertices(leftover, leftover.vertices - set(labels))
    pieces: List[Set[int]] = []
    for component in connected_components(labeled):
        if len(component) < min_size:
            continue
        piece = delete_vertices(labeled, labeled.vertices - component)
        names = {v: labels[v] for v in component}
        expected = delete_vertices(target, target.vertices - set(names.values()))
        if relabel(piece, names) == expected:
            pieces.append(component)
    return pieces


def _rebuild_type_two(net: FusionNetwork) -> FusionNetwork:
    record = net.failure
    prev = record.previous
    if not prev.edge_order:
        raise NetworkError("Type-II rebuild needs the edge order the network was built from.")
    target = Graph.from_edges(prev.edge_order)
    phys = prev.physical
    discarded = {record.z_measured, record.x_measured} | set(phys.adjacency[record.x_measured])
    leftover = delete_vertices(phys, discarded)

    pieces = _target_pieces(leftover, dict(prev.labels), target, prev.ftype.discard_below)
    survivors = set().union(*pieces)
    kept = delete_vertices(leftover, leftover.vertices - survivors)
    placed = {prev.labels[v]: v for v in kept.vertices}
    built = {normalize_edge(prev.labels[a], prev.labels[b]) for a, b in kept.edges}
    missing = [(a, b) for a, b in prev.edge_order if normalize_edge(a, b) not in built]

    sub = assemble(missing, FusionType.TYPE_II, prev.next_id, placed=placed)
    physical = union(kept, Graph(frozenset(sub.vertices), frozenset(sub.edges)))
    labels = {vertex: t for t, vertex in sub.position.items()}
    logger.debug(
        f"Type-II rebuild of {record.fusion}: X on {record.x_measured}, "
        f"{len(pieces)} components kept, {len(missing)} target edges rebuilt"
    )
    return make_network(
        physical, sub.fusions, labels, prev.ftype, sub.pool, sub.next_id, edge_order=prev.edge_order
    )


def rebuild_after_failure(
    net: FusionNetwork, u: int, v: int, ftype: Optional[FusionType] = None
) -> FusionNetwork:
    """Rebuild the network after a failed fusion {u, v}.

    Type-I: destroyed edges are collected per surviving component.
    Single-qubit components are rebuilt from scratch; every other destroyed
    edge is recreated inside a fresh sub-network that is fused back onto its
    surviving endpoint. The sub-network fusions and the attachment fusions
    come first in the new pending order, followed by the retried fusion
    {u, v} and the untouched remainder.

    Type-II: the X-measured endpoint's neighbors are lost as well. Of the
    rest, labeled components of at least three qubits whose edges already
    match the target are kept and every other qubit is measured out. The
    target edges not inside a kept component are traversed again in the
    network's edge order. A missing edge from a kept qubit to a target
    vertex not placed yet costs one 3-qubit cluster (two edges) and one
    fusion onto the kept qubit.

    Args:
        net: Output of ``fuse_failure`` for the fusion {u, v}.
        u: First endpoint of the failed fusion.
        v: Second endpoint of the failed fusion.
        ftype: Optional check against the network's fusion type.

    Raises:
        NetworkError: If ``net`` carries no matching failure record, or a
            Type-II network does not know its edge order.
    """
    record = net.failure
    if record is None or record.fusion != normalize_edge(u, v):
        raise NetworkError(f"No failure record for fusion ({u}, {v}).")
    if ftype is not None and ftype is not net.ftype:
        raise NetworkError(f"Network is {net.ftype.label}, not {ftype.label}.")
    if net.ftype is FusionType.TYPE_I:
        return _rebuild_type_one(net)
    return _rebuild_type_two(net)


def step(
    state: ProtocolState, outcome: Outcome, reorder_on_failure: bool = False
) -> ProtocolState:
    """Attempt the head fusion of the pending order.

    Raises:
        NetworkError: If the state is already done.
    """
    if state.done or not state.pending:
        raise NetworkError("Cannot step a finished protocol state.")
    f = state.pending[0]
    if Outcome(outcome) is Outcome.SUCCESS:
        net = fuse_success(state.net, f)
    else:
        net = rebuild_after_failure(fuse_failure(state.net, f), *f)
        if reorder_on_failure:
            net = apply_ordering(net, order_fusions(net))
    if not net.fusions:
        return ProtocolState(_finish(net, state.target), state.target, done=True)
    return ProtocolState(net, state.target)


def run_trajectory(
    initial: ProtocolState, outcomes: Iterable[Outcome], reorder_on_failure: bool = False
) -> ProtocolState:
    """Fold ``step`` over ``outcomes``, stopping as soon as the target exists."""
    state = initial
    for outcome in outcomes:
        if state.done:
            break
        state = step(state, outcome, reorder_on_failure)
    return state


def count_fusions(initial: ProtocolState, outcomes: Sequence[Outcome]) -> int:
    """Number of outcomes consumed before the trajectory reached the target."""
    state = initial
    used = 0
    for outcome in outcomes:
        if state.done:
            break
        state = step(state, outcome)
        used += 1
    return used
