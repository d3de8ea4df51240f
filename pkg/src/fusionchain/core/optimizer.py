"""Optimizations that lower the expected number of fusions.

Two independent knobs: shrink the target's edge count by local
complementation before a network is built, and order the fusions of a
network so that independent fusions are attempted before dependent ones.
"""

import logging
from collections import Counter
from dataclasses import dataclass, replace
from typing import Dict, List, Tuple

from networkx.utils import UnionFind

from fusionchain.core.graph import (
    Edge,
    Graph,
    connected_components,
    local_complement,
    maximum_matching,
    normalize_edge,
)
from fusionchain.core.network import FusionNetwork, NetworkError

logger = logging.getLogger(__name__)


def greedy_lc_minimize(g: Graph) -> Tuple[Graph, List[int]]:
    """Greedily apply edge-reducing local complementations.

    Vertices are scanned in id order; the first complementation that strictly
    lowers the edge count is applied and the scan restarts.

    Returns:
        The reduced graph and the vertices complemented, in order. Replaying
        the sequence on ``g`` reproduces the reduced graph.
    """
    current = g
    sequence: List[int] = []
    improved = True
    while improved:
        improved = False
        for v in current.sorted_vertices():
            candidate = local_complement(current, v)
            if candidate.edge_count < current.edge_count:
                logger.debug(f"LC at {v}: {current.edge_count} -> {candidate.edge_count} edges")
                current = candidate
                sequence.append(v)
                improved = True
                break
    return current, sequence


@dataclass(frozen=True)
class FusionQuotient:
    """Network contracted along its physical edges.

    Attributes:
        graph: One vertex per physical component (its smallest qubit id), one
            edge per pair of components joined by at least one fusion.
        component_of: Qubit id to component vertex.
        multiplicity: Number of fusions behind each quotient edge.
        internal: Fusions whose ends already share a component.
    """

    graph: Graph
    component_of: Dict[int, int]
    multiplicity: Dict[Edge, int]
    internal: Tuple[Edge, ...]


def _quotient(fusions: List[Edge], component_of: Dict[int, int]) -> FusionQuotient:
    multiplicity: Counter = Counter()
    internal: List[Edge] = []
    for u, v in fusions:
        cu, cv = component_of[u], component_of[v]
        if cu == cv:
            internal.append((u, v))
        else:
            multiplicity[normalize_edge(cu, cv)] += 1
    vertices = frozenset(component_of.values())
    graph = Graph(vertices, frozenset(multiplicity))
    return FusionQuotient(graph, component_of, dict(multiplicity), tuple(internal))


def contract_non_fusion_edges(net: FusionNetwork) -> FusionQuotient:
    """Contract every physical edge of ``net`` so that only fusions remain."""
    component_of: Dict[int, int] = {}
    for component in connected_components(net.physical):
        rep = min(component)
        for v in component:
            component_of[v] = rep
    return _quotient(list(net.fusions), component_of)


@dataclass(frozen=True)
class OrderingPlan:
    """Fusion order together with the matching rounds that produced it."""

    order: Tuple[Edge, ...]
    rounds: Tuple[Tuple[Edge, ...], ...]


def _merged(classes: UnionFind, component_of: Dict[int, int]) -> Dict[int, int]:
    low: Dict[int, int] = {}
    for members in classes.to_sets():
        for m in members:
            low[m] = min(members)
    return {v: low[c] for v, c in component_of.items()}


def order_fusions(net: FusionNetwork) -> OrderingPlan:
    """Order fusions by repeated maximum matching on the contracted network.

    Each round matches disjoint pairs of components, schedules one fusion per
    matched pair (the smallest) and merges the pair. Fusions left inside a
    single component once nothing more can be matched follow in sorted
    order, one per round.
    """
    quotient = contract_non_fusion_edges(net)
    classes = UnionFind(sorted(set(quotient.component_of.values())))
    remaining = list(net.fusions)
    rounds: List[Tuple[Edge, ...]] = []

    while True:
        component_of = _merged(classes, quotient.component_of)
        current = _quotient(remaining, component_of)
        matched = maximum_matching(current.graph)
        if not matched:
            break
        chosen: List[Edge] = []
        for pair in sorted(matched):
            chosen.append(
                min(f for f in remaining if tuple(sorted(map(component_of.get, f))) == pair)
            )
            classes.union(*pair)
        for f in chosen:
            remaining.remove(f)
        rounds.append(tuple(sorted(chosen)))
        logger.debug(f"Matching round {len(rounds)}: {len(chosen)} fusions")

    rounds.extend((f,) for f in sorted(remaining))
    order = tuple(f for fusion_round in rounds for f in fusion_round)
    logger.debug(f"Ordered {len(order)} fusions in {len(rounds)} rounds")
    return OrderingPlan(order, tuple(rounds))


def apply_ordering(net: FusionNetwork, plan: OrderingPlan) -> FusionNetwork:
    """Return ``net`` with its fusion list replaced by ``plan.order``.

    Raises:
        NetworkError: If the plan is not a permutation of the network's fusions.
    """
    if sorted(plan.order) != sorted(net.fusions):
        raise NetworkError("Ordering plan is not a permutation of the network's fusions.")
    return replace(net, fusions=tuple(plan.order), failure=None)
