"""Experiment orchestration: strategies, baseline, Monte Carlo and sweeps."""

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from fusionchain.config import (
    BASELINE_AGREEMENT_TOL,
    BASELINE_STRATEGY,
    DEFAULT_MASTER_SEED,
    DEFAULT_MAX_STATES,
    DEFAULT_PROBABILITIES,
    DEFAULT_SWEEP_GRAPHS,
    MONTE_CARLO_SIGMA,
    MONTE_CARLO_STEP_CAP,
    SOLVER_AGREEMENT_TOL,
    STRATEGY_CONFIG,
)
from fusionchain.core.graph import Edge, Graph, random_connected_graph
from fusionchain.core.markov import (
    TransitionGraph,
    TransitionMatrix,
    canonicalize,
    enumerate_transitions,
    expand,
    state_hash,
    to_matrix,
)
from fusionchain.core.mfpt import absorbing_chain_mfpt, hitting_time
from fusionchain.core.network import FusionNetwork, FusionType, build_network
from fusionchain.core.optimizer import apply_ordering, greedy_lc_minimize, order_fusions
from fusionchain.core.protocol import Outcome, ProtocolState, initial_state, step

logger = logging.getLogger(__name__)


class SolverDisagreement(RuntimeError):
    """Raised when two independent MFPT computations disagree."""


class StepCapExceeded(RuntimeError):
    """Raised when a simulated trajectory runs past the step cap."""


@dataclass(frozen=True)
class Strategy:
    """One of the four optimization combinations s1..s4."""

    name: str
    minimize_edges: bool
    optimize_order: bool

    @classmethod
    def from_name(cls, name: str) -> "Strategy":
        """Look up ``s1``..``s4`` in the strategy config.

        Raises:
            ValueError: For an unknown strategy name.
        """
        key = name.lower()
        if key not in STRATEGY_CONFIG:
            raise ValueError(f"Unknown strategy '{name}'. Choose from {sorted(STRATEGY_CONFIG)}.")
        config = STRATEGY_CONFIG[key]
        return cls(key, config["minimize_edges"], config["optimize_order"])

    @property
    def label(self) -> str:
        return STRATEGY_CONFIG[self.name]["label"]


@dataclass
class ExperimentRecord:
    """One row of experiment output; field order is the CSV column order."""

    graph_id: str
    m: int
    n: int
    fusion_type: str
    strategy: str
    p: float
    mfpt: float
    n_states: int
    n_initial_fusions: int
    seed: Optional[int]
    error: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


RECORD_FIELDS = [f.name for f in fields(ExperimentRecord)]


@dataclass(frozen=True)
class StrategyRun:
    """Everything ``analyze`` computes for one graph and strategy."""

    record: ExperimentRecord
    target: Graph
    network: FusionNetwork
    transitions: TransitionGraph
    matrix: TransitionMatrix
    lc_sequence: Tuple[int, ...] = ()


def derive_seed(master: int, *parts: Any) -> int:
    """Stable 32-bit seed from a master seed and any JSON-serializable parts."""
    payload = json.dumps([master, *parts], default=str).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=4).digest(), "big")


def random_edge_order(g: Graph, seed: int) -> List[Edge]:
    """Uniformly random traversal order of the edges of ``g``."""
    edges = g.sorted_edges()
    rng = np.random.default_rng(seed)
    return [edges[int(i)] for i in rng.permutation(len(edges))]


def _check_probability(p: float) -> None:
    if not 0 < p <= 1:
        raise ValueError(f"Success probability must lie in (0, 1], got {p}.")


def prepare_network(
    g: Graph, ftype: FusionType, strat: Strategy, order_seed: Optional[int] = None
) -> Tuple[Graph, FusionNetwork, List[int]]:
    """Apply the strategy's pre-processing and build the network.

    With edge minimization the protocol builds the reduced graph, which
    differs from ``g`` by local Clifford operations only.

    Returns:
        ``(target, network, lc_sequence)``.
    """
    target, sequence = greedy_lc_minimize(g) if strat.minimize_edges else (g, [])
    if sequence:
        logger.info(f"Edge minimization: {g.edge_count} -> {target.edge_count} edges")
    order = random_edge_order(target, order_seed) if order_seed is not None else None
    net = build_network(target, ftype, order)
    if strat.optimize_order:
        net = apply_ordering(net, order_fusions(net))
    return target, net, sequence


@dataclass(frozen=True)
class PreparedChain:
    """Enumerated chain of one (graph, fusion type, strategy) cell.

    Nothing here depends on the success probability, so one chain serves
    every probability of a sweep.
    """

    target: Graph
    network: FusionNetwork
    transitions: TransitionGraph
    lc_sequence: Tuple[int, ...] = ()


def prepare_chain(
    g: Graph,
    ftype: FusionType,
    strat: Strategy,
    reorder_on_failure: Optional[bool] = None,
    seed: Optional[int] = None,
    graph_id: str = "",
    max_states: int = DEFAULT_MAX_STATES,
) -> PreparedChain:
    """Build the strategy's network and enumerate its protocol states.

    Args:
        g: Connected target graph.
        ftype: Fusion type.
        strat: Strategy to apply.
        reorder_on_failure: Re-order fusions after every rebuild; defaults to
            the strategy's ``optimize_order``.
        seed: Seed of a random edge traversal order; sorted order if None.
        graph_id: Identifier used in log lines.
        max_states: Enumeration limit.
    """
    reorder = strat.optimize_order if reorder_on_failure is None else reorder_on_failure
    target, net, sequence = prepare_network(g, ftype, strat, seed)
    logger.info(
        f"{ftype.label} network for {graph_id or 'graph'} ({strat.name}): "
        f"{len(net.h.vertices)} qubits, {len(net.fusions)} fusions"
    )
    transitions = enumerate_transitions(initial_state(net, target), reorder, max_states)
    return PreparedChain(target, net, transitions, tuple(sequence))


def chain_mfpt(transitions: TransitionGraph, p: float) -> Tuple[TransitionMatrix, float]:
    """Weight ``transitions`` with ``p`` and solve for the expected fusion count.

    Raises:
        SolverDisagreement: If the two MFPT solvers disagree.
    """
    _check_probability(p)
    matrix = to_matrix(transitions, p)
    formula, hitting = absorbing_chain_mfpt(matrix)
    if abs(formula - hitting) > SOLVER_AGREEMENT_TOL * max(1.0, abs(hitting)):
        raise SolverDisagreement(
            f"MFPT solvers disagree: fundamental matrix {formula!r}, hitting time {hitting!r}."
        )
    logger.info(f"MFPT at p={p}: {formula:.6f} over {transitions.size} states")
    return matrix, formula


def _strategy_record(
    g: Graph,
    ftype: FusionType,
    strat: Strategy,
    p: float,
    chain: PreparedChain,
    mfpt: float,
    seed: Optional[int],
    graph_id: str,
) -> ExperimentRecord:
    return ExperimentRecord(
        graph_id=graph_id,
        m=len(g.vertices),
        n=g.edge_count,
        fusion_type=ftype.value,
        strategy=strat.name,
        p=p,
        mfpt=mfpt,
        n_states=chain.transitions.size,
        n_initial_fusions=len(chain.network.fusions),
        seed=seed,
    )


def solve_strategy(
    g: Graph,
    ftype: FusionType,
    strat: Strategy,
    p: float,
    reorder_on_failure: Optional[bool] = None,
    seed: Optional[int] = None,
    graph_id: str = "",
    max_states: int = DEFAULT_MAX_STATES,
) -> StrategyRun:
    """Run the full pipeline for one cell and keep the intermediate objects.

    Arguments are those of ``prepare_chain`` plus the success probability.

    Raises:
        SolverDisagreement: If the two MFPT solvers disagree.
    """
    _check_probability(p)
    chain = prepare_chain(g, ftype, strat, reorder_on_failure, seed, graph_id, max_states)
    matrix, mfpt = chain_mfpt(chain.transitions, p)
    record = _strategy_record(g, ftype, strat, p, chain, mfpt, seed, graph_id)
    return StrategyRun(
        record, chain.target, chain.network, chain.transitions, matrix, chain.lc_sequence
    )


def run_strategy(
    g: Graph,
    ftype: FusionType,
    strat: Strategy,
    p: float,
    reorder_on_failure: Optional[bool] = None,
    seed: Optional[int] = None,
    graph_id: str = "",
    max_states: int = DEFAULT_MAX_STATES,
) -> ExperimentRecord:
    """MFPT of one (graph, fusion type, strategy, probability) cell."""
    return solve_strategy(
        g, ftype, strat, p, reorder_on_failure, seed, graph_id, max_states
    ).record


def restart_chain(k: int, p: float) -> TransitionMatrix:
    """Repeat-until-success chain: k successes in a row, any failure restarts.

    State ``j`` counts consecutive successes; state ``k`` is absorbing.
    """
    _check_probability(p)
    if k < 0:
        raise ValueError(f"Fusion count must be non-negative, got {k}.")
    matrix = np.zeros((k + 1, k + 1))
    for j in range(k):
        matrix[j + 1, j] += p
        matrix[0, j] += 1.0 - p
    matrix[k, k] = 1.0
    return TransitionMatrix(p, matrix, 0, k)


def baseline_fusion_count(g: Graph, ftype: FusionType, seed: Optional[int] = None) -> int:
    """Fusions in the unoptimized (s1) network, the baseline's restart unit.

    ``seed`` selects the same random edge order as the s1 strategy run.
    """
    _, net, _ = prepare_network(g, ftype, Strategy.from_name("s1"), seed)
    return len(net.fusions)


def restart_mfpt(k: int, p: float) -> float:
    """Expected fusions to get ``k`` successes in a row, restarting on failure.

    Uses the closed form ``(p^-k - 1) / (1 - p)`` (``k`` when ``p = 1``) and
    checks it against the hitting time of ``restart_chain``.

    Raises:
        SolverDisagreement: If the closed form and the chain solve disagree.
    """
    _check_probability(p)
    closed = float(k) if p == 1 else (p ** (-k) - 1.0) / (1.0 - p)
    oracle = float(hitting_time(restart_chain(k, p), k)[0])
    if abs(closed - oracle) > BASELINE_AGREEMENT_TOL * max(1.0, closed):
        raise SolverDisagreement(f"Baseline closed form {closed!r} != restart chain {oracle!r}.")
    return closed


def baseline_rus(g: Graph, ftype: FusionType, p: float, seed: Optional[int] = None) -> float:
    """Expected fusions when every failure restarts the whole s1 network."""
    _check_probability(p)
    return restart_mfpt(baseline_fusion_count(g, ftype, seed), p)


@dataclass(frozen=True)
class TrajectoryStep:
    """One attempted fusion of a simulated run."""

    index: int
    fusion: Edge
    outcome: Outcome
    state_hash: str


def format_trajectory_line(s: TrajectoryStep) -> str:
    """Render a step as ``<index> <u>-<v> <outcome> <state hash>``."""
    u, v = s.fusion
    return f"{s.index} {u}-{v} {s.outcome.value} {s.state_hash}"


def trace_trajectory(
    initial: ProtocolState,
    p: float,
    seed: int,
    reorder_on_failure: bool = False,
    step_cap: int = MONTE_CARLO_STEP_CAP,
) -> Iterator[TrajectoryStep]:
    """Simulate one run and yield every step.

    The outcome stream matches the first trial of ``monte_carlo`` with the
    same seed.

    Raises:
        StepCapExceeded: If the run needs more than ``step_cap`` fusions.
    """
    _check_probability(p)
    rng = np.random.default_rng(seed)
    state = initial
    index = 0
    while not state.done:
        if index >= step_cap:
            raise StepCapExceeded(f"Trajectory exceeded {step_cap} steps.")
        fusion = state.pending[0]
        outcome = Outcome.SUCCESS if rng.random() < p else Outcome.FAILURE
        state = step(state, outcome, reorder_on_failure)
        yield TrajectoryStep(index, fusion, outcome, state_hash(canonicalize(state).key))
        index += 1


def simulate(
    initial: ProtocolState,
    p: float,
    trials: int,
    seed: int,
    reorder_on_failure: bool = False,
    step_cap: int = MONTE_CARLO_STEP_CAP,
) -> np.ndarray:
    """Fusion counts of ``trials`` independent runs from ``initial``.

    Successor states are cached by canonical key, so repeated visits cost a
    dictionary lookup.

    Raises:
        ValueError: If ``trials`` is below 1.
        StepCapExceeded: If a run needs more than ``step_cap`` fusions.
    """
    _check_probability(p)
    if trials < 1:
        raise ValueError(f"Need at least one trial, got {trials}.")
    rng = np.random.default_rng(seed)
    start_key = canonicalize(initial).key
    states: Dict[bytes, ProtocolState] = {start_key: initial}
    moves: Dict[bytes, Tuple[bytes, bytes]] = {}

    def successors(key: bytes) -> Tuple[bytes, bytes]:
        if key not in moves:
            ok, failed = expand(states[key], reorder_on_failure)
            ok_key, failed_key = canonicalize(ok).key, canonicalize(failed).key
            states.setdefault(ok_key, ok)
            states.setdefault(failed_key, failed)
            moves[key] = (ok_key, failed_key)
        return moves[key]

    counts = np.zeros(trials, dtype=np.int64)
    for trial in range(trials):
        key = start_key
        used = 0
        while not states[key].done:
            if used >= step_cap:
                raise StepCapExceeded(f"Trial {trial} exceeded {step_cap} steps.")
            ok_key, failed_key = successors(key)
            key = ok_key if rng.random() < p else failed_key
            used += 1
        counts[trial] = used
    logger.debug(f"Simulated {trials} trials over {len(states)} distinct states")
    return counts


def monte_carlo(
    g: Graph,
    ftype: FusionType,
    strat: Strategy,
    p: float,
    trials: int,
    seed: int,
    reorder_on_failure: Optional[bool] = None,
    step_cap: int = MONTE_CARLO_STEP_CAP,
) -> Tuple[float, float]:
    """Sample mean and standard error of the number of fusions.

    The network is prepared exactly as ``run_strategy`` does with a sorted
    edge order.
    """
    reorder = strat.optimize_order if reorder_on_failure is None else reorder_on_failure
    target, net, _ = prepare_network(g, ftype, strat)
    counts = simulate(initial_state(net, target), p, trials, seed, reorder, step_cap)
    mean = float(counts.mean())
    stderr = float(counts.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    logger.info(f"Monte Carlo over {trials} trials: mean={mean:.6f}, stderr={stderr:.6f}")
    return mean, stderr


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian experiment over random G(m, n) graphs.

    Raises:
        ValueError: If a requested graph size admits no connected graph or a
            probability is out of range.
    """

    m: int
    n_values: Tuple[int, ...]
    graphs: int = DEFAULT_SWEEP_GRAPHS
    probabilities: Tuple[float, ...] = DEFAULT_PROBABILITIES
    fusion_types: Tuple[FusionType, ...] = (FusionType.TYPE_I, FusionType.TYPE_II)
    strategies: Tuple[str, ...] = tuple(STRATEGY_CONFIG)
    seed: int = DEFAULT_MASTER_SEED
    include_baseline: bool = True
    max_states: int = DEFAULT_MAX_STATES
    reorder_on_failure: Optional[bool] = None

    def __post_init__(self):
        """Validate sizes, probabilities and strategy names."""
        if self.graphs < 0:
            raise ValueError(f"Graph count must be non-negative, got {self.graphs}.")
        for n in self.n_values:
            if self.m < 2 or not self.m - 1 <= n <= self.m * (self.m - 1) // 2:
                raise ValueError(f"No connected simple graph has {self.m} vertices and {n} edges.")
        for p in self.probabilities:
            _check_probability(p)
        for name in self.strategies:
            Strategy.from_name(name)

    @property
    def cell_count(self) -> int:
        per_graph = len(self.fusion_types) * len(self.probabilities)
        rows = len(self.strategies) + (1 if self.include_baseline else 0)
        return len(self.n_values) * self.graphs * per_graph * rows


def _failed_record(base: Dict[str, Any], error: Exception) -> ExperimentRecord:
    reason = f"{type(error).__name__}: {error}"
    return ExperimentRecord(**base, mfpt=math.nan, n_states=0, n_initial_fusions=0, error=reason)


def sweep(spec: SweepSpec) -> List[ExperimentRecord]:
    """Run every cell of ``spec`` and return the rows in sweep order.

    Each (graph, fusion type, strategy) chain is enumerated once and solved
    for every probability. The baseline restarts the same s1 network. A
    failing cell becomes rows with NaN ``mfpt`` and the exception text in
    ``error``; the sweep carries on.
    """
    records: List[ExperimentRecord] = []
    for n in spec.n_values:
        for index in range(spec.graphs):
            graph_seed = derive_seed(spec.seed, "graph", spec.m, n, index)
            g = random_connected_graph(spec.m, n, graph_seed)
            graph_id = f"G({spec.m},{n})#{index}"
            for ftype in spec.fusion_types:
                order_seed = derive_seed(spec.seed, graph_id, ftype.value)
                for name in spec.strategies:
                    strat = Strategy.from_name(name)
                    records.extend(_sweep_cell(spec, g, graph_id, ftype, strat, order_seed))
                if spec.include_baseline:
                    records.extend(_baseline_rows(spec, g, graph_id, ftype, order_seed))
            logger.info(f"Sweep progress: {len(records)}/{spec.cell_count} rows")
    return records


def _cell_base(g: Graph, graph_id: str, ftype: FusionType, strategy: str) -> Dict[str, Any]:
    return dict(
        graph_id=graph_id,
        m=len(g.vertices),
        n=g.edge_count,
        fusion_type=ftype.value,
        strategy=strategy,
    )


def _sweep_cell(
    spec: SweepSpec,
    g: Graph,
    graph_id: str,
    ftype: FusionType,
    strat: Strategy,
    order_seed: int,
) -> List[ExperimentRecord]:
    base = _cell_base(g, graph_id, ftype, strat.name)
    try:
        chain = prepare_chain(
            g, ftype, strat, spec.reorder_on_failure, order_seed, graph_id, spec.max_states
        )
    except (ValueError, RuntimeError) as e:
        logger.warning(f"Cell {graph_id}/{ftype.value}/{strat.name} failed: {e}")
        return [_failed_record(dict(base, p=p, seed=order_seed), e) for p in spec.probabilities]

    rows = []
    for p in spec.probabilities:
        try:
            _, mfpt = chain_mfpt(chain.transitions, p)
        except (ValueError, RuntimeError) as e:
            logger.warning(f"Cell {graph_id}/{ftype.value}/{strat.name}/p={p} failed: {e}")
            rows.append(_failed_record(dict(base, p=p, seed=order_seed), e))
            continue
        rows.append(_strategy_record(g, ftype, strat, p, chain, mfpt, order_seed, graph_id))
    return rows


def _baseline_rows(
    spec: SweepSpec, g: Graph, graph_id: str, ftype: FusionType, order_seed: int
) -> List[ExperimentRecord]:
    base = _cell_base(g, graph_id, ftype, BASELINE_STRATEGY)
    rows = []
    try:
        k = baseline_fusion_count(g, ftype, order_seed)
    except (ValueError, RuntimeError) as e:
        logger.warning(f"Baseline for {graph_id}/{ftype.value} failed: {e}")
        return [_failed_record(dict(base, p=p, seed=order_seed), e) for p in spec.probabilities]
    for p in spec.probabilities:
        try:
            value = restart_mfpt(k, p)
        except (ValueError, RuntimeError) as e:
            logger.warning(f"Baseline for {graph_id}/{ftype.value}/p={p} failed: {e}")
            rows.append(_failed_record(dict(base, p=p, seed=order_seed), e))
            continue
        rows.append(
            ExperimentRecord(
                **base, p=p, mfpt=value, n_states=k + 1, n_initial_fusions=k, seed=order_seed
            )
        )
    return rows


def compare_with_analytic(
    g: Graph,
    ftype: FusionType,
    strat: Strategy,
    p: float,
    trials: int,
    seed: int,
    reorder_on_failure: Optional[bool] = None,
) -> Dict[str, Any]:
    """Monte Carlo estimate next to the exact MFPT of the same network.

    Returns:
        Dict with ``analytic``, ``mean``, ``stderr`` and ``within_sigma``;
        a deviation beyond ``MONTE_CARLO_SIGMA`` standard errors is logged
        as a warning.
    """
    analytic = run_strategy(g, ftype, strat, p, reorder_on_failure).mfpt
    mean, stderr = monte_carlo(g, ftype, strat, p, trials, seed, reorder_on_failure)
    within = abs(mean - analytic) <= MONTE_CARLO_SIGMA * stderr or math.isclose(mean, analytic)
    if not within:
        logger.warning(
            f"Monte Carlo mean {mean:.6f} is more than {MONTE_CARLO_SIGMA} standard errors "
            f"from the analytic value {analytic:.6f}"
        )
    return {"analytic": analytic, "mean": mean, "stderr": stderr, "within_sigma": within}
