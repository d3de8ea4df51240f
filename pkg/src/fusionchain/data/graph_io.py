"""JSON files for graphs, fusion networks and enumerated chains."""

import json
import logging
from typing import Any, Dict

from fusionchain.core.graph import Graph, GraphError
from fusionchain.core.markov import TransitionGraph, transition_graph_to_dict
from fusionchain.core.network import FusionNetwork
from fusionchain.utils.file_utils import resolve_input_path, resolve_output_path

logger = logging.getLogger(__name__)


def _load(path: str) -> Dict[str, Any]:
    source = resolve_input_path(path)
    try:
        with open(source, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ValueError(f"{path} is not valid JSON: {e}") from e


def _dump(doc: Dict[str, Any], path: str) -> str:
    destination = resolve_output_path(path, (".json",))
    with open(destination, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
    return str(destination.absolute())


def read_graph(path: str) -> Graph:
    """Load a ``{"vertices": [...], "edges": [[u, v], ...]}`` document.

    Raises:
        ValueError: If the file is missing, not JSON or not a graph.
    """
    doc = _load(path)
    if not isinstance(doc, dict):
        raise GraphError(f"{path} does not hold a graph object.")
    g = Graph.from_dict(doc)
    logger.info(f"Loaded graph from {path}: {len(g.vertices)} vertices, {g.edge_count} edges")
    return g


def write_graph(g: Graph, path: str) -> str:
    """Write ``g`` and return the absolute path written."""
    return _dump(g.to_dict(), path)


def write_network(net: FusionNetwork, path: str) -> str:
    """Write ``net`` in the network JSON format and return the absolute path."""
    return _dump(net.to_dict(), path)


def write_chain(tg: TransitionGraph, path: str) -> str:
    """Dump an enumerated chain with hashed states."""
    written = _dump(transition_graph_to_dict(tg), path)
    logger.info(f"Wrote {tg.size}-state chain to {written}")
    return written
