"""Command-line interface for fusionchain.

Every command prints exactly one JSON document to stdout. Logs go to
``fusionchain.log`` in the working directory.
"""

import json
import logging
import sys
from typing import Any, Dict, List, Optional, Tuple

import click

from fusionchain.config import (
    DEFAULT_MASTER_SEED,
    DEFAULT_MAX_STATES,
    DEFAULT_PROBABILITIES,
    DEFAULT_SWEEP_GRAPHS,
    LOG_FILE,
    STRATEGY_CONFIG,
    VERSION,
)
from fusionchain.core.graph import random_connected_graph
from fusionchain.core.network import FusionType
from fusionchain.core.pipeline import (
    Strategy,
    SweepSpec,
    baseline_fusion_count,
    baseline_rus,
    compare_with_analytic,
    format_trajectory_line,
    monte_carlo,
    prepare_network,
    solve_strategy,
    sweep,
    trace_trajectory,
)
from fusionchain.core.protocol import initial_state
from fusionchain.data.graph_io import read_graph, write_chain, write_graph, write_network
from fusionchain.data.records import summarize, write_records
from fusionchain.utils.file_utils import resolve_output_path
from fusionchain.utils.log_utils import log_duration, redirect_output_to_logger
from fusionchain.utils.text_utils import describe_count, format_edges


def configure_logging():
    """Send all logs to the log file so stdout stays pure JSON."""
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        filename=LOG_FILE,
        filemode="w",
        force=True,
    )


logger = logging.getLogger(__name__)

FUSION_TYPES = [t.value for t in FusionType]
STRATEGIES = list(STRATEGY_CONFIG)


def parse_int_list(text: str) -> List[int]:
    """Parse ``"7,8,9"`` or ``"7-11"`` into a list of integers."""
    try:
        if "-" in text and "," not in text:
            low, high = (int(x) for x in text.split("-"))
            return list(range(low, high + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"Invalid integer list: {text}. Use '7,8,9' or '7-11'.")


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"Invalid probability list: {text}. Use '0.5,0.75'.")


def parse_choices(text: str, valid: List[str], what: str) -> Tuple[str, ...]:
    chosen = tuple(x.strip().lower() for x in text.split(",") if x.strip())
    invalid = set(chosen) - set(valid)
    if invalid:
        raise click.BadParameter(
            f"Invalid {what}: {', '.join(sorted(invalid))}. Valid: {', '.join(valid)}"
        )
    return chosen


def emit(result: Dict[str, Any]) -> None:
    """Print the JSON result and mirror it into the log."""
    click.echo(json.dumps(result, indent=2))
    logger.info(f"JSON Result: {json.dumps(result)}")


def fail(message: str) -> None:
    click.echo(json.dumps({"error": message, "success": False}))
    sys.exit(1)


def graph_option(func):
    return click.option(
        "--graph", "graph_path", required=True, help="Target graph JSON file."
    )(func)


def fusion_type_option(func):
    return click.option(
        "--fusion-type",
        type=click.Choice(FUSION_TYPES),
        default=FusionType.TYPE_I.value,
        show_default=True,
        help="t1 = Type-I (2-qubit clusters), t2 = Type-II (3-qubit clusters).",
    )(func)


def prob_option(func):
    return click.option(
        "--prob", type=float, default=0.5, show_default=True, help="Fusion success probability."
    )(func)


def strategy_options(func):
    func = click.option(
        "--reorder-on-failure",
        type=bool,
        default=None,
        help="Re-order fusions after every failure. Defaults to the strategy's order flag.",
    )(func)
    return click.option(
        "--strategy",
        type=click.Choice(STRATEGIES),
        default="s1",
        show_default=True,
        help="s1 plain, s2 ordered, s3 edge-minimized, s4 both.",
    )(func)


@click.group()
@click.version_option(version=VERSION, prog_name="fusionchain")
def main():
    """Fusionchain CLI: expected fusion counts for graph-state generation.

    Core Abstraction:
      A target graph is built from small linear cluster states by
      probabilistic fusions. Failed fusions are repaired adaptively and the
      whole process is modelled as a Markov chain; the mean first passage
      time from start to target is the expected number of fusions.

    Response Schema:
      Success: {"success": true, ...data...}
      Failure: {"success": false, "error": "<reason>"}

    Commands:
      analyze    : Exact MFPT of one graph under one strategy.
      baseline   : Repeat-until-success MFPT of one graph.
      montecarlo : Simulated fusion counts for cross-checking analyze.
      sweep      : Random G(m, n) experiment written as CSV or JSON.
      gen-graph  : Write a random connected graph as JSON.
    """
    pass


@main.command("analyze")
@graph_option
@fusion_type_option
@strategy_options
@prob_option
@click.option("--seed", type=int, default=None, help="Random edge order seed (sorted if unset).")
@click.option("--max-states", type=int, default=DEFAULT_MAX_STATES, show_default=True)
@click.option("--dump-chain", default=None, help="Write the enumerated chain to this JSON file.")
@click.option(
    "--dump-network", default=None, help="Write the initial fusion network to this JSON file."
)
def analyze(
    graph_path: str,
    fusion_type: str,
    strategy: str,
    reorder_on_failure: Optional[bool],
    prob: float,
    seed: Optional[int],
    max_states: int,
    dump_chain: Optional[str],
    dump_network: Optional[str],
):
    """Compute the exact mean first passage time for one graph.

    Output Schema (JSON):
      {
        "success": true,
        "record": {"graph_id": "path.json", "m": 5, "n": 4, "fusion_type": "t1",
                   "strategy": "s1", "p": 0.5, "mfpt": 12.0, "n_states": 4,
                   "n_initial_fusions": 3, "seed": null, "error": ""},
        "target_edges": [[0, 1], ...],
        "fusion_order": [[1, 2], ...],
        "lc_sequence": [],
        "chain_path": "/absolute/path/chain.json",
        "network_path": "/absolute/path/network.json"
      }
    """
    configure_logging()
    try:
        g = read_graph(graph_path)
        strat = Strategy.from_name(strategy)
        ftype = FusionType(fusion_type)
        with log_duration(logger, "Analysis"), redirect_output_to_logger(logger):
            run = solve_strategy(
                g, ftype, strat, prob, reorder_on_failure, seed, graph_path, max_states
            )
        result: Dict[str, Any] = {
            "success": True,
            "record": run.record.to_dict(),
            "target_edges": [list(e) for e in run.target.sorted_edges()],
            "fusion_order": [list(f) for f in run.network.fusions],
            "lc_sequence": list(run.lc_sequence),
        }
        if dump_chain:
            result["chain_path"] = write_chain(run.transitions, dump_chain)
        if dump_network:
            result["network_path"] = write_network(run.network, dump_network)
        logger.info(
            f"Fusions {format_edges(run.network.fusions) or '-'}; "
            f"{describe_count(run.transitions.size, 'state')}"
        )
        emit(result)
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        fail(str(e))
    except Exception as e:
        logger.exception("Unexpected error during analysis")
        fail(str(e))


@main.command("baseline")
@graph_option
@fusion_type_option
@prob_option
def baseline(graph_path: str, fusion_type: str, prob: float):
    """Expected fusions when any failure restarts the whole construction.

    Output Schema (JSON):
      {"success": true, "fusion_type": "t1", "p": 0.5, "k": 3, "mfpt": 14.0}
    """
    configure_logging()
    try:
        g = read_graph(graph_path)
        ftype = FusionType(fusion_type)
        value = baseline_rus(g, ftype, prob)
        result = {
            "success": True,
            "fusion_type": ftype.value,
            "p": prob,
            "k": baseline_fusion_count(g, ftype),
            "mfpt": value,
        }
        emit(result)
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        fail(str(e))
    except Exception as e:
        logger.exception("Unexpected error during baseline computation")
        fail(str(e))


@main.command("montecarlo")
@graph_option
@fusion_type_option
@strategy_options
@prob_option
@click.option("--trials", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=DEFAULT_MASTER_SEED, show_default=True)
@click.option("--trace", default=None, help="Write the first trial's steps to this file.")
@click.option(
    "--compare", is_flag=True, default=False, help="Also compute the exact MFPT and compare."
)
def montecarlo(
    graph_path: str,
    fusion_type: str,
    strategy: str,
    reorder_on_failure: Optional[bool],
    prob: float,
    trials: int,
    seed: int,
    trace: Optional[str],
    compare: bool,
):
    """Simulate the protocol and report the mean number of fusions.

    Output Schema (JSON):
      {"success": true, "trials": 10000, "seed": 0, "mean": 9.98, "stderr": 0.07,
       "trace_path": "/absolute/path/trace.log"}
      With --compare the result also carries "analytic" and "within_sigma".
    """
    configure_logging()
    try:
        g = read_graph(graph_path)
        strat = Strategy.from_name(strategy)
        ftype = FusionType(fusion_type)
        result: Dict[str, Any] = {"success": True, "trials": trials, "seed": seed}
        with log_duration(logger, "Simulation"), redirect_output_to_logger(logger):
            if compare:
                result.update(
                    compare_with_analytic(g, ftype, strat, prob, trials, seed, reorder_on_failure)
                )
            else:
                mean, stderr = monte_carlo(
                    g, ftype, strat, prob, trials, seed, reorder_on_failure
                )
                result.update(mean=mean, stderr=stderr)
        if trace:
            destination = resolve_output_path(trace)
            target, net, _ = prepare_network(g, ftype, strat)
            reorder = strat.optimize_order if reorder_on_failure is None else reorder_on_failure
            steps = trace_trajectory(initial_state(net, target), prob, seed, reorder)
            with open(destination, "w", encoding="utf-8") as f:
                for s in steps:
                    f.write(format_trajectory_line(s) + "\n")
            result["trace_path"] = str(destination.absolute())
        emit(result)
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        fail(str(e))
    except Exception as e:
        logger.exception("Unexpected error during simulation")
        fail(str(e))


@main.command("sweep")
@click.option("--m", "m", type=int, default=6, show_default=True, help="Vertices per graph.")
@click.option(
    "--n", "n_values", default="10", show_default=True, help="Edge counts: '10' or '7-11'."
)
@click.option("--graphs", type=int, default=DEFAULT_SWEEP_GRAPHS, show_default=True)
@click.option(
    "--probs",
    default=",".join(str(p) for p in DEFAULT_PROBABILITIES),
    show_default=True,
    help="Comma-separated success probabilities.",
)
@click.option("--seed", type=int, default=DEFAULT_MASTER_SEED, show_default=True)
@click.option("--fusion-types", default=",".join(FUSION_TYPES), show_default=True)
@click.option("--strategies", default=",".join(STRATEGIES), show_default=True)
@click.option("--no-baseline", is_flag=True, default=False, help="Skip baseline rows.")
@click.option("--max-states", type=int, default=DEFAULT_MAX_STATES, show_default=True)
@click.option("--out", default="sweep.csv", show_default=True, help="Output file.")
@click.option("--json", "as_json", is_flag=True, default=False, help="Write JSON instead of CSV.")
def sweep_command(
    m: int,
    n_values: str,
    graphs: int,
    probs: str,
    seed: int,
    fusion_types: str,
    strategies: str,
    no_baseline: bool,
    max_states: int,
    out: str,
    as_json: bool,
):
    """Run strategies and the baseline over random G(m, n) graphs.

    Output Schema (JSON):
      {
        "success": true,
        "output_path": "/absolute/path/sweep.csv",
        "rows": 200,
        "failed_rows": 0,
        "summary": [{"fusion_type": "t1", "strategy": "s1", "p": 0.5, "mfpt": 21.3}, ...]
      }
    """
    configure_logging()
    try:
        spec = SweepSpec(
            m=m,
            n_values=tuple(parse_int_list(n_values)),
            graphs=graphs,
            probabilities=tuple(parse_float_list(probs)),
            fusion_types=tuple(
                FusionType(t) for t in parse_choices(fusion_types, FUSION_TYPES, "fusion types")
            ),
            strategies=parse_choices(strategies, STRATEGIES, "strategies"),
            seed=seed,
            include_baseline=not no_baseline,
            max_states=max_states,
        )
        logger.info(f"Starting sweep: {describe_count(spec.cell_count, 'row')} planned")
        with log_duration(logger, "Sweep"), redirect_output_to_logger(logger):
            records = sweep(spec)
        path = write_records(records, out, as_json)
        result = {
            "success": True,
            "output_path": path,
            "rows": len(records),
            "failed_rows": sum(1 for r in records if r.error),
            "summary": summarize(records).to_dict(orient="records"),
        }
        emit(result)
    except click.BadParameter as e:
        logger.error(f"Invalid option: {e}")
        fail(str(e))
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        fail(str(e))
    except Exception as e:
        logger.exception("Unexpected error during sweep")
        fail(str(e))


@main.command("gen-graph")
@click.option("--m", "m", type=int, required=True, help="Number of vertices.")
@click.option("--n", "n", type=int, required=True, help="Number of edges.")
@click.option("--seed", type=int, default=DEFAULT_MASTER_SEED, show_default=True)
@click.option("--out", default=None, help="Write the graph here instead of stdout.")
def gen_graph(m: int, n: int, seed: int, out: Optional[str]):
    """Generate a random connected graph with m vertices and n edges.

    Output Schema (JSON):
      {"success": true, "graph": {"vertices": [...], "edges": [...]}, "output_path": null}
    """
    configure_logging()
    try:
        g = random_connected_graph(m, n, seed)
        result: Dict[str, Any] = {"success": True, "graph": g.to_dict(), "output_path": None}
        if out:
            result["output_path"] = write_graph(g, out)
        emit(result)
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        fail(str(e))
    except Exception as e:
        logger.exception("Unexpected error during graph generation")
        fail(str(e))


if __name__ == "__main__":
    main()
