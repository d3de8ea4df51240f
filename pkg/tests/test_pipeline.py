import math
from unittest.mock import patch

import numpy as np
import pytest

from fusionchain.core.graph import Graph
from fusionchain.core.markov import StateLimitExceeded, enumerate_transitions
from fusionchain.core.mfpt import hitting_time
from fusionchain.core.network import FusionType, build_network
from fusionchain.core.pipeline import (
    ExperimentRecord,
    StepCapExceeded,
    Strategy,
    SweepSpec,
    TrajectoryStep,
    baseline_fusion_count,
    baseline_rus,
    chain_mfpt,
    compare_with_analytic,
    derive_seed,
    format_trajectory_line,
    monte_carlo,
    prepare_chain,
    prepare_network,
    random_edge_order,
    restart_chain,
    run_strategy,
    simulate,
    solve_strategy,
    sweep,
    trace_trajectory,
)
from fusionchain.core.protocol import Outcome, initial_state

T1, T2 = FusionType.TYPE_I, FusionType.TYPE_II
S1 = Strategy.from_name("s1")
S2 = Strategy.from_name("s2")


def test_strategy_from_name():
    """Test strategy lookup is case-insensitive."""
    s = Strategy.from_name("S4")
    assert (s.name, s.minimize_edges, s.optimize_order) == ("s4", True, True)
    assert S1.label == "Standard protocol"
    with pytest.raises(ValueError, match="Unknown strategy"):
        Strategy.from_name("s9")


def test_run_strategy_single_fusion(path3):
    """Test one fusion costs 1 / p on average."""
    record = run_strategy(path3, T1, S1, 0.5)
    assert record.mfpt == pytest.approx(2.0)
    assert record.n_states == 2
    assert record.n_initial_fusions == 1
    assert (record.m, record.n, record.fusion_type, record.strategy) == (3, 2, "t1", "s1")
    assert record.seed is None
    assert record.error == ""


def test_dependent_order_costs_more(path5):
    """Test the sorted 5-path order needs 12 fusions and the matched order 10."""
    dependent = run_strategy(path5, T1, S1, 0.5)
    independent = run_strategy(path5, T1, S2, 0.5, reorder_on_failure=False)
    assert dependent.mfpt == pytest.approx(12.0)
    assert dependent.n_states == 4
    assert independent.mfpt == pytest.approx(10.0)
    assert independent.n_states == 6


def test_certain_success_counts_fusions(path5):
    """Test p = 1 needs exactly one attempt per fusion."""
    assert run_strategy(path5, T1, S1, 1.0).mfpt == pytest.approx(3.0)


def test_single_edge_needs_no_fusions(single_edge):
    """Test a single-edge target is already built."""
    for ftype in FusionType:
        record = run_strategy(single_edge, ftype, S1, 0.5)
        assert record.mfpt == 0.0
        assert record.n_states == 1
        assert record.n_initial_fusions == 0


def test_type_two_path4_single_fusion(path4):
    """Test the one Type-II fusion of a 4-path costs 1 / p."""
    record = run_strategy(path4, T2, S1, 0.75)
    assert record.mfpt == pytest.approx(4 / 3)
    assert record.n_states == 2


def test_mfpt_decreases_with_probability(path5):
    """Test higher success probability never costs more fusions."""
    values = [run_strategy(path5, T1, S1, p).mfpt for p in (0.5, 0.66, 0.75, 0.85, 1.0)]
    assert values == sorted(values, reverse=True)


def test_solve_strategy_keeps_intermediates(k4):
    """Test edge minimization builds the reduced graph."""
    run = solve_strategy(k4, T1, Strategy.from_name("s3"), 0.5)
    assert run.lc_sequence == (0,)
    assert run.target.edge_count == 3
    assert run.record.n == 6
    assert run.matrix.size == run.transitions.size == run.record.n_states


def test_run_strategy_rejects_bad_probability(path3):
    """Test probabilities outside (0, 1] are rejected."""
    with pytest.raises(ValueError, match="Success probability"):
        run_strategy(path3, T1, S1, 0.0)


def test_run_strategy_state_limit(path5):
    """Test the state cap propagates."""
    with pytest.raises(StateLimitExceeded):
        run_strategy(path5, T1, S1, 0.5, max_states=2)


@pytest.mark.parametrize("k, expected", [(1, 2.0), (2, 6.0), (3, 14.0)])
def test_restart_chain(k, expected):
    """Test the repeat-until-success chain at p = 1/2."""
    tm = restart_chain(k, 0.5)
    assert tm.size == k + 1
    np.testing.assert_allclose(tm.matrix.sum(axis=0), 1.0)
    assert hitting_time(tm, k)[0] == pytest.approx(expected)


def test_baseline_rus(path3, path4, path5):
    """Test restarting on every failure costs (p^-k - 1) / (1 - p)."""
    assert baseline_rus(path3, T1, 0.5) == pytest.approx(2.0)
    assert baseline_rus(path4, T1, 0.5) == pytest.approx(6.0)
    assert baseline_rus(path5, T1, 0.5) == pytest.approx(14.0)
    assert baseline_rus(path5, T1, 1.0) == 3.0
    assert baseline_rus(path4, T2, 0.5) == pytest.approx(2.0)


def test_baseline_not_below_adaptive(path5):
    """Test adaptive rebuilding never loses to full restarts."""
    for p in (0.5, 0.75):
        assert run_strategy(path5, T1, S1, p).mfpt <= baseline_rus(path5, T1, p) + 1e-9


def test_derive_seed():
    """Test derived seeds are stable 32-bit integers."""
    first = derive_seed(0, "graph", 6, 10, 0)
    assert first == derive_seed(0, "graph", 6, 10, 0)
    assert first != derive_seed(0, "graph", 6, 10, 1)
    assert first != derive_seed(1, "graph", 6, 10, 0)
    assert 0 <= first < 2**32


def test_random_edge_order_is_permutation(k4):
    """Test random traversal orders cover every edge once."""
    order = random_edge_order(k4, 3)
    assert sorted(order) == k4.sorted_edges()
    assert order == random_edge_order(k4, 3)


def test_simulate_matches_analytic(path5):
    """Test the Monte Carlo mean lands within 5 standard errors of 12."""
    mean, stderr = monte_carlo(path5, T1, S1, 0.5, trials=4000, seed=7)
    assert stderr > 0
    assert abs(mean - 12.0) <= 5 * stderr


def test_monte_carlo_single_trial(path3):
    """Test a single trial has zero standard error."""
    mean, stderr = monte_carlo(path3, T1, S1, 1.0, trials=1, seed=0)
    assert (mean, stderr) == (1.0, 0.0)


def test_simulate_errors(path5):
    """Test trial count and step cap validation."""
    initial = initial_state(build_network(path5, T1), path5)
    with pytest.raises(ValueError, match="at least one trial"):
        simulate(initial, 0.5, 0, seed=0)
    with pytest.raises(StepCapExceeded):
        simulate(initial, 0.01, 5, seed=0, step_cap=2)


def test_trace_matches_first_trial(path5):
    """Test a traced run uses the same outcome stream as the first trial."""
    initial = initial_state(build_network(path5, T1), path5)
    steps = list(trace_trajectory(initial, 0.5, seed=3))
    counts = simulate(initial, 0.5, 1, seed=3)
    assert len(steps) == counts[0]
    assert [s.index for s in steps] == list(range(len(steps)))
    assert steps[-1].outcome is Outcome.SUCCESS


def test_trace_step_cap(path5):
    """Test a traced run stops at the step cap."""
    initial = initial_state(build_network(path5, T1), path5)
    with pytest.raises(StepCapExceeded):
        list(trace_trajectory(initial, 0.01, seed=0, step_cap=2))


def test_format_trajectory_line():
    """Test the trace line layout."""
    line = format_trajectory_line(TrajectoryStep(4, (1, 2), Outcome.FAILURE, "abc"))
    assert line == "4 1-2 failure abc"


def test_compare_with_analytic(path3):
    """Test the comparison reports both estimates."""
    result = compare_with_analytic(path3, T1, S1, 0.5, trials=2000, seed=1)
    assert result["analytic"] == pytest.approx(2.0)
    assert abs(result["mean"] - 2.0) < 0.3
    assert set(result) == {"analytic", "mean", "stderr", "within_sigma"}


def test_sweep_rows():
    """Test one row per cell plus baseline rows, in sweep order."""
    spec = SweepSpec(
        m=4,
        n_values=(3,),
        graphs=2,
        probabilities=(0.5, 0.75),
        fusion_types=(T1,),
        strategies=("s1", "s2"),
        seed=5,
    )
    records = sweep(spec)
    assert len(records) == spec.cell_count == 12
    assert all(isinstance(r, ExperimentRecord) for r in records)
    assert [r.strategy for r in records[:6]] == ["s1", "s1", "s2", "s2", "baseline", "baseline"]
    assert {r.graph_id for r in records} == {"G(4,3)#0", "G(4,3)#1"}
    assert all(r.error == "" and math.isfinite(r.mfpt) for r in records)

    for graph_id in ("G(4,3)#0", "G(4,3)#1"):
        rows = [r for r in records if r.graph_id == graph_id]
        assert len({r.seed for r in rows}) == 1
        s1 = next(r for r in rows if r.strategy == "s1")
        for r in rows:
            if r.strategy == "baseline":
                assert r.n_initial_fusions == s1.n_initial_fusions
                assert r.n_states == r.n_initial_fusions + 1


def test_sweep_is_reproducible():
    """Test equal seeds give equal rows."""
    spec = SweepSpec(
        m=4, n_values=(4,), graphs=1, probabilities=(0.5,), fusion_types=(T1,), strategies=("s1",)
    )
    assert [r.to_dict() for r in sweep(spec)] == [r.to_dict() for r in sweep(spec)]


def test_sweep_empty():
    """Test zero graphs produce no rows."""
    assert sweep(SweepSpec(m=5, n_values=(6,), graphs=0)) == []


def test_sweep_failed_cells_become_rows():
    """Test a failing cell records its error and the sweep continues."""
    spec = SweepSpec(
        m=4,
        n_values=(3,),
        graphs=1,
        probabilities=(0.5,),
        fusion_types=(T1,),
        strategies=("s1",),
        max_states=1,
    )
    records = sweep(spec)
    assert len(records) == 2
    failed, baseline = records
    assert math.isnan(failed.mfpt)
    assert failed.error.startswith("StateLimitExceeded")
    assert failed.seed is not None
    assert baseline.error == ""


def test_sweep_spec_validation():
    """Test infeasible sizes, probabilities and strategies are rejected."""
    with pytest.raises(ValueError, match="No connected simple graph"):
        SweepSpec(m=4, n_values=(2,))
    with pytest.raises(ValueError, match="Success probability"):
        SweepSpec(m=4, n_values=(3,), probabilities=(0.0,))
    with pytest.raises(ValueError, match="Unknown strategy"):
        SweepSpec(m=4, n_values=(3,), strategies=("s7",))
    with pytest.raises(ValueError, match="non-negative"):
        SweepSpec(m=4, n_values=(3,), graphs=-1)


def test_experiment_record_to_dict():
    """Test records serialize in column order."""
    record = ExperimentRecord("g", 3, 2, "t1", "s1", 0.5, 2.0, 2, 1, None)
    assert list(record.to_dict()) == [
        "graph_id",
        "m",
        "n",
        "fusion_type",
        "strategy",
        "p",
        "mfpt",
        "n_states",
        "n_initial_fusions",
        "seed",
        "error",
    ]


@pytest.mark.parametrize("p", [0.5, 0.66, 0.75, 0.85])
def test_restart_chain_matches_closed_form(p):
    """Test the repeat-until-success chain against (p^-k - 1) / (1 - p)."""
    for k in range(9):
        closed = (p ** (-k) - 1.0) / (1.0 - p)
        assert hitting_time(restart_chain(k, p), k)[0] == pytest.approx(closed, rel=1e-9)


CYCLE5 = Graph.from_edges([(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])
CYCLE4 = Graph.from_edges([(0, 1), (1, 2), (2, 3), (0, 3)])


@pytest.mark.parametrize("ftype", [T1, T2])
@pytest.mark.parametrize("name", ["s2", "s4"])
def test_ordered_strategies_on_cyclic_targets(k4, ftype, name):
    """Test matched fusion orders solve on targets whose clusters close cycles."""
    strat = Strategy.from_name(name)
    for g in (k4, CYCLE5):
        record = run_strategy(g, ftype, strat, 0.5)
        assert record.error == ""
        assert math.isfinite(record.mfpt) and record.mfpt > 0
        certain = run_strategy(g, ftype, strat, 1.0)
        assert certain.mfpt == pytest.approx(certain.n_initial_fusions)


def test_prepared_chain_serves_every_probability(path5):
    """Test one enumeration solved at several probabilities matches per-probability runs."""
    chain = prepare_chain(path5, T1, S1)
    for p in (0.5, 0.75, 1.0):
        _, mfpt = chain_mfpt(chain.transitions, p)
        assert mfpt == pytest.approx(run_strategy(path5, T1, S1, p).mfpt)


def test_sweep_enumerates_once_per_cell():
    """Test probabilities reuse the chain of their (graph, fusion type, strategy) cell."""
    spec = SweepSpec(
        m=4,
        n_values=(4,),
        graphs=2,
        probabilities=(0.5, 0.66, 0.75),
        fusion_types=(T1,),
        strategies=("s1", "s2"),
        include_baseline=False,
    )
    with patch(
        "fusionchain.core.pipeline.enumerate_transitions", wraps=enumerate_transitions
    ) as spy:
        records = sweep(spec)
    assert len(records) == 12
    assert spy.call_count == 4


def test_baseline_uses_s1_network(k4):
    """Test the restart unit is the fusion count of the same s1 network."""
    for ftype in (T1, T2):
        for seed in (None, 3, 8):
            _, net, _ = prepare_network(k4, ftype, S1, seed)
            assert baseline_fusion_count(k4, ftype, seed) == len(net.fusions)


def test_sweep_baseline_failure_becomes_rows():
    """Test a failing baseline is recorded per probability and the sweep continues."""
    spec = SweepSpec(
        m=4,
        n_values=(3,),
        graphs=1,
        probabilities=(0.5, 0.75),
        fusion_types=(T1,),
        strategies=("s1",),
    )
    with patch("fusionchain.core.pipeline.baseline_fusion_count") as count:
        count.side_effect = RuntimeError("no network")
        records = sweep(spec)
    baseline = [r for r in records if r.strategy == "baseline"]
    assert len(baseline) == 2
    assert all(math.isnan(r.mfpt) and "no network" in r.error for r in baseline)
    assert all(r.seed is not None for r in baseline)
    assert all(r.error == "" for r in records if r.strategy == "s1")


def mean_mfpt(records, ftype, strategy):
    values = [r.mfpt for r in records if r.fusion_type == ftype.value and r.strategy == strategy]
    return float(np.mean(values))


def test_random_graphs_beat_restart_baseline():
    """Test adaptive rebuilding on G(6, 10) against restarting at p = 1/2.

    Every strategy needs fewer fusions than the baseline, edge minimization
    with ordered fusions is more than ten times cheaper for Type-I, and the
    Type-II protocol needs at least as many fusions as Type-I.
    """
    spec = SweepSpec(
        m=6,
        n_values=(10,),
        graphs=3,
        probabilities=(0.5,),
        fusion_types=(T1, T2),
        strategies=("s1", "s4"),
        seed=3,
    )
    records = sweep(spec)
    assert all(r.error == "" for r in records)
    for ftype in (T1, T2):
        baseline = mean_mfpt(records, ftype, "baseline")
        for name in ("s1", "s4"):
            assert mean_mfpt(records, ftype, name) < baseline
    assert mean_mfpt(records, T1, "baseline") / mean_mfpt(records, T1, "s4") > 10
    assert mean_mfpt(records, T2, "s1") >= mean_mfpt(records, T1, "s1")


def test_edge_minimization_gains_grow_with_edges():
    """Test the relative saving of edge minimization is larger on denser graphs."""
    spec = SweepSpec(
        m=6,
        n_values=(7, 11),
        graphs=4,
        probabilities=(0.5,),
        fusion_types=(T1,),
        strategies=("s1", "s3"),
        include_baseline=False,
        seed=1,
    )
    records = sweep(spec)
    assert all(r.error == "" for r in records)

    def saving(n):
        rows = [r for r in records if r.n == n]
        return 1 - mean_mfpt(rows, T1, "s3") / mean_mfpt(rows, T1, "s1")

    assert saving(7) >= 0
    assert saving(11) > saving(7)


@pytest.mark.parametrize("ftype", [T1, T2])
@pytest.mark.parametrize("name", ["path4", "path5", "star3", "triangle", "cycle4"])
def test_monte_carlo_agrees_with_analytic(request, ftype, name):
    """Test 10^5 simulated runs land within three standard errors of the exact value."""
    g = CYCLE4 if name == "cycle4" else request.getfixturevalue(name)
    analytic = run_strategy(g, ftype, S1, 0.75).mfpt
    mean, stderr = monte_carlo(g, ftype, S1, 0.75, trials=100_000, seed=2026)
    assert abs(mean - analytic) <= 3 * stderr
