import json
import math
from pathlib import Path

import pandas as pd
import pytest

from fusionchain.core.graph import GraphError
from fusionchain.core.markov import enumerate_transitions
from fusionchain.core.network import FusionNetwork, FusionType, build_network
from fusionchain.core.pipeline import RECORD_FIELDS, ExperimentRecord
from fusionchain.core.protocol import initial_state
from fusionchain.data.graph_io import (
    read_graph,
    write_chain,
    write_graph,
    write_network,
)
from fusionchain.data.records import records_to_frame, summarize, write_records


def make_records():
    return [
        ExperimentRecord("G#0", 5, 4, "t1", "s1", 0.5, 12.0, 4, 3, 17),
        ExperimentRecord("G#1", 5, 4, "t1", "s1", 0.5, 10.0, 4, 3, 18),
        ExperimentRecord("G#0", 5, 4, "t1", "baseline", 0.5, 14.0, 4, 3, None),
        ExperimentRecord("G#1", 5, 4, "t1", "s1", 0.75, math.nan, 0, 0, 18, "boom"),
    ]


def test_graph_file_roundtrip(tmp_path, path5):
    """Test graphs survive a write and read."""
    written = write_graph(path5, str(tmp_path / "g.json"))
    assert read_graph(written) == path5


def test_read_graph_errors(tmp_path):
    """Test invalid graph files raise ValueError."""
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(GraphError, match="does not hold a graph"):
        read_graph(str(bad))

    bad.write_text("{oops")
    with pytest.raises(ValueError, match="not valid JSON"):
        read_graph(str(bad))

    with pytest.raises(ValueError, match="File not found"):
        read_graph(str(tmp_path / "missing.json"))


def test_write_graph_requires_json_suffix(tmp_path, path3):
    """Test graph files must end in .json."""
    with pytest.raises(ValueError, match="must end with"):
        write_graph(path3, str(tmp_path / "g.txt"))


def test_network_file_roundtrip(tmp_path, triangle):
    """Test a written network parses back to the same network."""
    net = build_network(triangle, FusionType.TYPE_II)
    written = write_network(net, str(tmp_path / "net.json"))
    doc = json.loads(Path(written).read_text())
    assert doc["edge_order"] == [[0, 1], [0, 2], [1, 2]]
    assert FusionNetwork.from_dict(doc) == net


def test_write_chain(tmp_path, path5):
    """Test the chain dump lists every state and arc."""
    net = build_network(path5, FusionType.TYPE_I)
    tg = enumerate_transitions(initial_state(net, path5))
    doc = json.loads(Path(write_chain(tg, str(tmp_path / "chain.json"))).read_text())
    assert len(doc["states"]) == 4
    assert len(doc["arcs"]) == 8
    assert doc["target"] == 3


def test_records_to_frame():
    """Test the frame has one column per record field."""
    frame = records_to_frame(make_records())
    assert list(frame.columns) == RECORD_FIELDS
    assert str(frame["seed"].dtype) == "Int64"
    assert frame["seed"].isna().sum() == 1


def test_write_records_csv(tmp_path):
    """Test CSV output keeps row order and error text."""
    path = write_records(make_records(), str(tmp_path / "out" / "rows.csv"))
    frame = pd.read_csv(path, keep_default_na=False)
    assert list(frame.columns) == RECORD_FIELDS
    assert list(frame["graph_id"]) == ["G#0", "G#1", "G#0", "G#1"]
    assert list(frame["error"]) == ["", "", "", "boom"]


def test_write_records_json(tmp_path):
    """Test JSON output is an array of row objects."""
    path = write_records(make_records(), str(tmp_path / "rows.json"), as_json=True)
    rows = json.loads(Path(path).read_text())
    assert len(rows) == 4
    assert rows[0]["mfpt"] == 12.0
    assert rows[2]["seed"] is None
    with pytest.raises(ValueError, match="must end with"):
        write_records(make_records(), str(tmp_path / "rows.csv"), as_json=True)


def test_summarize_skips_failed_rows():
    """Test failed rows do not enter the mean."""
    summary = summarize(make_records())
    rows = {(r["strategy"], r["p"]): r["mfpt"] for r in summary.to_dict(orient="records")}
    assert rows == {("baseline", 0.5): 14.0, ("s1", 0.5): 11.0}
