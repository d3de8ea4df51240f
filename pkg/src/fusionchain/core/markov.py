"""Markov chain over protocol states.

States reached by the protocol are identified up to renaming of their
auxiliary qubits, enumerated depth-first and turned into a dense
column-stochastic transition matrix for a chosen success probability.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from fusionchain.config import DEFAULT_MAX_STATES, STOCHASTIC_TOL
from fusionchain.core.network import fusion_owner_classes
from fusionchain.core.protocol import Outcome, ProtocolState, step

logger = logging.getLogger(__name__)


class StateLimitExceeded(RuntimeError):
    """Raised when enumeration discovers more states than allowed."""


@dataclass(frozen=True)
class CanonicalState:
    """Canonical serialization of a protocol state.

    Attributes:
        key: Byte string shared by all states equal up to auxiliary renaming.
        index: Position in the enumerated chain, ``None`` before numbering.
    """

    key: bytes
    index: Optional[int] = None

    @property
    def hash(self) -> str:
        return state_hash(self.key)


Arc = Tuple[int, int, Outcome]


@dataclass(frozen=True)
class TransitionGraph:
    """Reachable states of the protocol and their outcome arcs.

    The target state carries a success and a failure self-loop, so every
    state has exactly one arc per outcome.
    """

    states: Tuple[CanonicalState, ...]
    arcs: Tuple[Arc, ...]
    start: int
    target: int

    @property
    def size(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic matrix with ``matrix[i, j]`` = p(j -> i)."""

    p_success: float
    matrix: np.ndarray
    start: int
    target: int

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def state_hash(key: bytes) -> str:
    """Short stable identifier for a canonical key."""
    return hashlib.sha1(key).hexdigest()


def _refine(colors: Dict[int, str], adjacency: Dict[int, frozenset]) -> Dict[int, int]:
    """Color refinement over physical neighbors until the partition is stable."""
    ranks = _compress(colors)
    for _ in range(len(colors)):
        signatures = {
            v: json.dumps([ranks[v], sorted(ranks[w] for w in adjacency[v])]) for v in ranks
        }
        refined = _compress(signatures)
        if len(set(refined.values())) == len(set(ranks.values())):
            return refined
        ranks = refined
    return ranks


def _compress(signatures: Dict[int, str]) -> Dict[int, int]:
    order = {sig: i for i, sig in enumerate(sorted(set(signatures.values())))}
    return {v: order[sig] for v, sig in signatures.items()}


def canonicalize(s: ProtocolState) -> CanonicalState:
    """Serialize ``s`` so that auxiliary vertex numbering does not matter.

    Vertices are colored by what they will become (target label, copy class
    or spare qubit) and by the positions of the pending fusions touching
    them. The colors are refined over the physical graph and vertices are
    renumbered by refined color.
    """
    net = s.net
    if s.done:
        doc: Dict[str, Any] = {"done": True, "ftype": net.ftype.value}
        return CanonicalState(json.dumps(doc, separators=(",", ":")).encode())

    physical = net.physical
    owners = fusion_owner_classes(net)
    incident: Dict[int, List[int]] = {v: [] for v in physical.vertices}
    for i, (u, v) in enumerate(net.fusions):
        incident[u].append(i)
        incident[v].append(i)

    initial: Dict[int, str] = {}
    for v in physical.vertices:
        if v in net.labels:
            kind: List[Any] = ["L", net.labels[v]]
        elif v in net.pool:
            kind = ["P"]
        elif owners.get(v) is not None:
            kind = ["O", owners[v]]
        else:
            kind = ["A"]
        initial[v] = json.dumps([kind, incident[v]])

    ranks = _refine(initial, physical.adjacency)
    ordered = sorted(physical.vertices, key=lambda v: (ranks[v], v))
    position = {v: i for i, v in enumerate(ordered)}

    def renamed(u: int, v: int) -> List[int]:
        return sorted((position[u], position[v]))

    doc = {
        "ftype": net.ftype.value,
        "colors": [json.loads(initial[v])[0] for v in ordered],
        "edges": sorted(renamed(u, v) for u, v in physical.edges),
        "fusions": [renamed(u, v) for u, v in net.fusions],
        "pool": sorted(position[v] for v in net.pool),
    }
    return CanonicalState(json.dumps(doc, separators=(",", ":")).encode())


def expand(
    s: ProtocolState, reorder_on_failure: bool = False
) -> Tuple[ProtocolState, ProtocolState]:
    """Return the (success, failure) successors of a non-target state."""
    return (
        step(s, Outcome.SUCCESS, reorder_on_failure),
        step(s, Outcome.FAILURE, reorder_on_failure),
    )


def enumerate_transitions(
    initial: ProtocolState,
    reorder_on_failure: bool = False,
    max_states: int = DEFAULT_MAX_STATES,
) -> TransitionGraph:
    """Enumerate every state reachable from ``initial``.

    States are numbered in depth-first discovery order, success branch first,
    and the target state is moved to the last index.

    Args:
        initial: Start state of the protocol.
        reorder_on_failure: Re-run the fusion ordering after each rebuild.
        max_states: Upper bound on the number of distinct states.

    Raises:
        ValueError: If ``max_states`` is below 1.
        StateLimitExceeded: If more than ``max_states`` states are reachable.
    """
    if max_states < 1:
        raise ValueError(f"max_states must be at least 1, got {max_states}.")

    order: List[bytes] = []
    successors: Dict[bytes, Tuple[bytes, bytes]] = {}
    target_key: Optional[bytes] = None
    stack = [initial]

    while stack:
        state = stack.pop()
        key = canonicalize(state).key
        if key in successors or key == target_key:
            continue
        order.append(key)
        if len(order) > max_states:
            raise StateLimitExceeded(
                f"More than {max_states} states reachable; enumeration aborted."
            )
        if state.done:
            target_key = key
            continue
        ok, failed = expand(state, reorder_on_failure)
        successors[key] = (canonicalize(ok).key, canonicalize(failed).key)
        logger.debug(f"State {len(order) - 1}: {len(state.pending)} pending")
        stack.append(failed)
        stack.append(ok)

    if target_key is None:
        raise RuntimeError("Enumeration finished without reaching the target state.")

    order.remove(target_key)
    order.append(target_key)
    index = {key: i for i, key in enumerate(order)}
    arcs: List[Arc] = []
    for key in order:
        i = index[key]
        if key == target_key:
            arcs += [(i, i, Outcome.SUCCESS), (i, i, Outcome.FAILURE)]
            continue
        ok_key, failed_key = successors[key]
        arcs += [(i, index[ok_key], Outcome.SUCCESS), (i, index[failed_key], Outcome.FAILURE)]

    states = tuple(CanonicalState(key, i) for i, key in enumerate(order))
    start = index[canonicalize(initial).key]
    logger.info(f"Enumerated {len(states)} states ({len(arcs)} arcs)")
    return TransitionGraph(states, tuple(arcs), start, len(states) - 1)


def to_matrix(tg: TransitionGraph, p: float) -> TransitionMatrix:
    """Weight success arcs with ``p`` and failure arcs with ``1 - p``.

    Raises:
        ValueError: If ``p`` is not in (0, 1].
    """
    if not 0 < p <= 1:
        raise ValueError(f"Success probability must lie in (0, 1], got {p}.")
    q = 1.0 - p
    matrix = np.zeros((tg.size, tg.size))
    for j, i, kind in tg.arcs:
        matrix[i, j] += p if kind is Outcome.SUCCESS else q

    sums = matrix.sum(axis=0)
    if not np.allclose(sums, 1.0, rtol=0, atol=STOCHASTIC_TOL):
        raise RuntimeError("Transition matrix columns do not sum to 1.")
    return TransitionMatrix(p, matrix, tg.start, tg.target)


def transition_graph_to_dict(tg: TransitionGraph) -> Dict[str, Any]:
    """JSON document for ``--dump-chain``: hashed states, arcs and endpoints."""
    return {
        "states": [{"index": s.index, "hash": s.hash} for s in tg.states],
        "arcs": [{"from": j, "to": i, "kind": kind.value} for j, i, kind in tg.arcs],
        "start": tg.start,
        "target": tg.target,
    }
