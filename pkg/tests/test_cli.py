import json
from pathlib import Path
from unittest.mock import patch

import pandas as pd
from click.testing import CliRunner

from fusionchain.cli import main, parse_choices, parse_float_list, parse_int_list

PATH5 = {"vertices": [0, 1, 2, 3, 4], "edges": [[0, 1], [1, 2], [2, 3], [3, 4]]}
PATH3 = {"vertices": [0, 1, 2], "edges": [[0, 1], [1, 2]]}


def write_graph_file(doc, name="graph.json"):
    Path(name).write_text(json.dumps(doc))
    return name


def read_log():
    log_file = Path("fusionchain.log")
    assert log_file.exists()
    return log_file.read_text()


def test_help():
    """Test the group help lists every command."""
    runner = CliRunner()
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for command in ("analyze", "baseline", "montecarlo", "sweep", "gen-graph"):
        assert command in result.output


def test_analyze_success():
    """Test analyze reports the exact MFPT of a 5-path."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        path = write_graph_file(PATH5)
        result = runner.invoke(main, ["analyze", "--graph", path, "--prob", "0.5"])

        assert result.exit_code == 0
        data = json.loads(result.output)
        assert data["success"] is True
        assert data["record"]["mfpt"] == 12.0
        assert data["record"]["n_states"] == 4
        assert data["record"]["graph_id"] == path
        assert data["fusion_order"] == [[1, 2], [3, 4], [5, 6]]
        assert data["lc_sequence"] == []

        content = read_log()
        assert "Fusions 1-2, 3-4, 5-6; 4 states" in content
        assert "Analysis took" in content
        assert "JSON Result:" in content


def test_analyze_ordered_without_reordering():
    """Test the matched order is cheaper when failures keep the order."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        path = write_graph_file(PATH5)
        result = runner.invoke(
            main,
            ["analyze", "--graph", path, "--strategy", "s2", "--reorder-on-failure", "false"],
        )
        assert result.exit_code == 0
        data = json.loads(result.output)
        assert data["record"]["mfpt"] == 10.0
        assert data["fusion_order"] == [[1, 2], [5, 6], [3, 4]]


def test_analyze_dump_chain():
    """Test the enumerated chain is written on request."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        path = write_graph_file(PATH3)
        result = runner.invoke(main, ["analyze", "--graph", path, "--dump-chain", "out/chain.json"])
        assert result.exit_code == 0
        data = json.loads(result.output)
        chain = json.loads(Path(data["chain_path"]).read_text())
        assert len(chain["states"]) == 2
        assert (chain["start"], chain["target"]) == (0, 1)


def test_analyze_dump_network():
    """Test the initial fusion network is written on request."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        path = write_graph_file(PATH3)
        result = runner.invoke(main, ["analyze", "--graph", path, "--dump-network", "net.json"])
        assert result.exit_code == 0
        data = json.loads(result.output)
        network = json.loads(Path(data["network_path"]).read_text())
        assert network["fusions"] == [[1, 2]]
        assert network["labels"] == {"0": 0, "1": 1, "3": 2}
        assert network["edge_order"] == [[0, 1], [1, 2]]
        assert network["ftype"] == "t1"


def test_analyze_missing_graph():
    """Test a missing graph file is reported as JSON."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        result = runner.invoke(main, ["analyze", "--graph", "nope.json"])
        assert result.exit_code == 1
        data = json.loads(result.output)
        assert data["success"] is False
        assert "File not found" in data["error"]
        assert "Invalid input" in read_log()


def test_analyze_invalid_probability():
    """Test out-of-range probabilities are rejected."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        path = write_graph_file(PATH3)
        result = runner.invoke(main, ["analyze", "--graph", path, "--prob", "0"])
        assert result.exit_code == 1
        assert "Success probability" in json.loads(result.output)["error"]


def test_analyze_malformed_graph():
    """Test invalid JSON input."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        Path("bad.json").write_text("{not json")
        result = runner.invoke(main, ["analyze", "--graph", "bad.json"])
        assert result.exit_code == 1
        assert "not valid JSON" in json.loads(result.output)["error"]


@patch("fusionchain.cli.solve_strategy")
def test_analyze_unexpected_error(mock_solve):
    """Test unexpected failures are logged with a traceback."""
    mock_solve.side_effect = RuntimeError("solver exploded")
    runner = CliRunner()
    with runner.isolated_filesystem():
        path = write_graph_file(PATH3)
        result = runner.invoke(main, ["analyze", "--graph", path])
        assert result.exit_code == 1
        assert json.loads(result.output)["error"] == "solver exploded"
        content = read_log()
        assert "Unexpected error during analysis" in content
        assert "Traceback" in content


def test_baseline():
    """Test the restart baseline of a 5-path."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        path = write_graph_file(PATH5)
        result = runner.invoke(main, ["baseline", "--graph", path])
        assert result.exit_code == 0
        data = json.loads(result.output)
        assert data["k"] == 3
        assert data["mfpt"] == 14.0
        assert data["fusion_type"] == "t1"


def test_montecarlo_with_trace():
    """Test simulation output and the trace file."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        path = write_graph_file(PATH3)
        result = runner.invoke(
            main,
            ["montecarlo", "--graph", path, "--trials", "500", "--seed", "2", "--trace", "t.log"],
        )
        assert result.exit_code == 0
        data = json.loads(result.output)
        assert data["trials"] == 500
        assert abs(data["mean"] - 2.0) < 0.5
        lines = Path(data["trace_path"]).read_text().splitlines()
        assert lines
        assert lines[-1].split()[:3] == [str(len(lines) - 1), "1-2", "success"]
        assert "Simulation took" in read_log()


def test_montecarlo_compare():
    """Test --compare adds the exact value."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        path = write_graph_file(PATH3)
        result = runner.invoke(
            main, ["montecarlo", "--graph", path, "--trials", "300", "--compare"]
        )
        assert result.exit_code == 0
        data = json.loads(result.output)
        assert data["analytic"] == 2.0
        assert "within_sigma" in data


def test_sweep_csv():
    """Test a small sweep is written as CSV with a summary."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        result = runner.invoke(
            main,
            [
                "sweep",
                "--m", "4",
                "--n", "3",
                "--graphs", "1",
                "--probs", "0.5",
                "--fusion-types", "t1",
                "--strategies", "s1,s2",
                "--out", "runs/out.csv",
            ],
        )
        assert result.exit_code == 0
        data = json.loads(result.output)
        assert data["rows"] == 3
        assert data["failed_rows"] == 0
        assert {row["strategy"] for row in data["summary"]} == {"s1", "s2", "baseline"}

        frame = pd.read_csv(data["output_path"])
        assert list(frame.columns)[:3] == ["graph_id", "m", "n"]
        assert len(frame) == 3
        assert "Sweep took" in read_log()


def test_sweep_json():
    """Test --json writes an array of row objects."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        result = runner.invoke(
            main,
            ["sweep", "--m", "3", "--n", "2", "--graphs", "1", "--probs", "0.5",
             "--strategies", "s1", "--no-baseline", "--json", "--out", "out.json"],
        )
        assert result.exit_code == 0
        rows = json.loads(Path("out.json").read_text())
        assert len(rows) == 2
        assert {row["fusion_type"] for row in rows} == {"t1", "t2"}


def test_sweep_invalid_options():
    """Test bad strategy names, sizes and output suffixes."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        result = runner.invoke(main, ["sweep", "--m", "4", "--n", "3", "--strategies", "s9"])
        assert result.exit_code == 1
        assert "Invalid strategies" in json.loads(result.output)["error"]

        result = runner.invoke(main, ["sweep", "--m", "4", "--n", "2"])
        assert result.exit_code == 1
        assert "No connected simple graph" in json.loads(result.output)["error"]

        result = runner.invoke(
            main, ["sweep", "--m", "3", "--n", "2", "--graphs", "0", "--out", "out.txt"]
        )
        assert result.exit_code == 1
        assert "must end with" in json.loads(result.output)["error"]


def test_gen_graph():
    """Test random graph generation to a file."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        result = runner.invoke(
            main, ["gen-graph", "--m", "5", "--n", "6", "--seed", "1", "--out", "g.json"]
        )
        assert result.exit_code == 0
        data = json.loads(result.output)
        assert len(data["graph"]["edges"]) == 6
        assert json.loads(Path("g.json").read_text()) == data["graph"]


def test_gen_graph_infeasible():
    """Test impossible sizes are reported."""
    runner = CliRunner()
    with runner.isolated_filesystem():
        result = runner.invoke(main, ["gen-graph", "--m", "3", "--n", "5"])
        assert result.exit_code == 1
        assert "No connected simple graph" in json.loads(result.output)["error"]


def test_parse_helpers():
    """Test list option parsing."""
    assert parse_int_list("7-9") == [7, 8, 9]
    assert parse_int_list("7,9") == [7, 9]
    assert parse_float_list("0.5,0.75") == [0.5, 0.75]
    assert parse_choices("S1, s2", ["s1", "s2"], "strategies") == ("s1", "s2")
