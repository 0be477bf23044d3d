import numpy as np
import pytest
from hypothesis import given, strategies as st

from tarsim.cost import (
    COST_PRESETS,
    EXPENSIVE_TRAINING,
    UNIFORM_COST,
    CostStructure,
    cost_dynamics_table,
    iteration_cost,
    optimal_cost,
    relative_cost,
    write_dynamics_csv,
    write_run_costs_csv,
)
from tarsim.workflow import IterationEntry, RunConfig, RunRecord


def synth_record(workflow, raw_iterations, total_positives=100, category="cat"):
    """Build a RunRecord from raw tuples (cum_reviewed, cum_pos, depth, p2pos)."""
    entries = []
    prev_reviewed = prev_pos = 0
    for i, (cum_reviewed, cum_pos, depth, p2pos) in enumerate(raw_iterations):
        entries.append(
            IterationEntry(
                iteration=i,
                batch_doc_ids=tuple(f"d{j}" for j in range(prev_reviewed, cum_reviewed)),
                batch_positives=cum_pos - prev_pos,
                cum_reviewed=cum_reviewed,
                cum_positives=cum_pos,
                phase2_depth=depth,
                phase2_positives=p2pos,
            )
        )
        prev_reviewed, prev_pos = cum_reviewed, cum_pos
    config = RunConfig(category_id=category, workflow=workflow, feature_mode="bm25")
    return RunRecord(
        config=config,
        seed_docs=("d0", "d1"),
        total_positives=total_positives,
        target_reached=True,
        iterations=tuple(entries),
    )


def random_synth_record(rng):
    """Random but internally consistent record for oracle comparisons."""
    workflow = "two_phase" if rng.random() < 0.7 else "one_phase"
    n_iters = int(rng.integers(1, 30))
    raw = []
    cum_reviewed = cum_pos = 0
    for _ in range(n_iters):
        batch = int(rng.integers(1, 50))
        batch_pos = int(rng.integers(0, batch + 1))
        cum_reviewed += batch
        cum_pos += batch_pos
        if workflow == "two_phase":
            depth = int(rng.integers(0, 400))
            p2pos = int(rng.integers(0, depth + 1))
        else:
            depth = p2pos = None
        raw.append((cum_reviewed, cum_pos, depth, p2pos))
    return synth_record(workflow, raw), raw, workflow


def oracle_sectors(raw_entry, workflow, cs):
    """Naive recomputation of the four sector costs from raw counts."""
    cum_reviewed, cum_pos, depth, p2pos = raw_entry
    p1_pos = cum_pos * cs.phase1_pos
    p1_neg = (cum_reviewed - cum_pos) * cs.phase1_neg
    if workflow == "one_phase":
        p2_pos = p2_neg = 0.0
    else:
        p2_pos = p2pos * cs.phase2_pos
        p2_neg = (depth - p2pos) * cs.phase2_neg
    return p1_pos, p1_neg, p2_pos, p2_neg


class TestCostStructure:
    def test_presets(self):
        assert UNIFORM_COST.as_tuple() == (1, 1, 1, 1)
        assert EXPENSIVE_TRAINING.as_tuple() == (10, 10, 1, 1)
        assert COST_PRESETS["uniform"] is UNIFORM_COST

    def test_negative_cost_rejected(self):
        with pytest.raises(ValueError):
            CostStructure(1, 1, -1, 1)


class TestIterationCost:
    def test_expensive_training_hand_example(self):
        # 600 phase-1 docs (60 pos / 540 neg), depth 900 holding 20 positives
        record = synth_record("two_phase", [(600, 60, 900, 20)])
        entry = iteration_cost(record, 0, EXPENSIVE_TRAINING)
        assert (entry.phase1_pos_cost, entry.phase1_neg_cost) == (600, 5400)
        assert (entry.phase2_pos_cost, entry.phase2_neg_cost) == (20, 880)
        assert entry.total == 6900
        assert entry.total == 10 * 600 + 900

    def test_uniform_one_phase_counts_reviewed(self):
        record = synth_record("one_phase", [(1000, 80, None, None)])
        assert iteration_cost(record, 0, UNIFORM_COST).total == 1000

    def test_depth_zero_iteration(self):
        record = synth_record("two_phase", [(50, 40, 0, 0)])
        entry = iteration_cost(record, 0, EXPENSIVE_TRAINING)
        assert entry.phase2_pos_cost == entry.phase2_neg_cost == 0
        assert entry.depth_zero

    def test_out_of_range(self):
        record = synth_record("one_phase", [(10, 5, None, None)])
        with pytest.raises(ValueError, match="out of range"):
            iteration_cost(record, 1, UNIFORM_COST)
        with pytest.raises(ValueError, match="out of range"):
            iteration_cost(record, -1, UNIFORM_COST)


class TestOptimalCost:
    def test_min_with_earliest_tie(self):
        # totals: 10*(2+48)+4500=5000; 10*(20+280)+1200=4200; ...
        record = synth_record(
            "two_phase",
            [(50, 2, 4500, 100), (300, 20, 1200, 70), (460, 30, 0, 0)],
        )
        totals = [iteration_cost(record, i, EXPENSIVE_TRAINING).total for i in range(3)]
        best, arg = optimal_cost(record, EXPENSIVE_TRAINING)
        assert best == min(totals)
        assert arg == int(np.argmin(totals))

    def test_tie_prefers_earliest(self):
        record = synth_record("two_phase", [(10, 1, 100, 5), (20, 2, 90, 5)])
        t0 = iteration_cost(record, 0, UNIFORM_COST).total
        t1 = iteration_cost(record, 1, UNIFORM_COST).total
        assert t0 == t1  # 10+100 == 20+90
        assert optimal_cost(record, UNIFORM_COST) == (t0, 0)

    def test_one_phase_uses_stopping_iteration(self):
        record = synth_record("one_phase", [(2, 1, None, None), (500, 80, None, None)])
        assert optimal_cost(record, UNIFORM_COST) == (500, 1)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            record, raw, workflow = random_synth_record(rng)
            cs = CostStructure(*rng.integers(1, 12, size=4).tolist())
            if workflow == "one_phase":
                expected = (sum(oracle_sectors(raw[-1], workflow, cs)), len(raw) - 1)
            else:
                totals = [sum(oracle_sectors(r, workflow, cs)) for r in raw]
                expected = (min(totals), int(np.argmin(totals)))
            assert optimal_cost(record, cs) == expected


class TestRelativeCost:
    def test_self_is_exactly_one(self):
        costs = {("a", 0): 123.0, ("a", 1): 77.0, ("b", 0): 5.0}
        assert relative_cost(costs, costs) == 1.0

    def test_mean_ratio_within_category(self):
        run = {("a", 0): 80.0, ("a", 1): 120.0}
        base = {("a", 0): 100.0, ("a", 1): 100.0}
        assert relative_cost(run, base) == pytest.approx(1.0)

    def test_macro_average_over_categories(self):
        run = {("a", 0): 80.0, ("b", 0): 120.0}
        base = {("a", 0): 100.0, ("b", 0): 100.0}
        assert relative_cost(run, base) == pytest.approx(1.0)

    def test_unpaired_runs_rejected(self):
        with pytest.raises(ValueError, match="unpaired"):
            relative_cost({("a", 0): 1.0}, {("a", 1): 1.0})

    def test_zero_baseline_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            relative_cost({("a", 0): 1.0}, {("a", 0): 0.0})


class TestDynamicsTable:
    def test_sectors_sum_to_totals(self):
        rng = np.random.default_rng(1)
        record, raw, workflow = random_synth_record(rng)
        table = cost_dynamics_table(record, EXPENSIVE_TRAINING)
        assert len(table) == len(record.iterations)
        for entry in table:
            assert entry.total == (
                entry.phase1_pos_cost + entry.phase1_neg_cost
                + entry.phase2_pos_cost + entry.phase2_neg_cost
            )

    def test_all_depth_zero_reduces_to_phase1(self):
        record = synth_record("two_phase", [(10, 5, 0, 0), (30, 12, 0, 0)])
        table = cost_dynamics_table(record, EXPENSIVE_TRAINING)
        for entry, (cum_reviewed, _, _, _) in zip(table, [(10, 5, 0, 0), (30, 12, 0, 0)]):
            assert entry.total == 10 * cum_reviewed
            assert entry.depth_zero

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        record, raw, workflow = random_synth_record(rng)
        cs = CostStructure(3, 2, 1, 0.5)
        table = cost_dynamics_table(record, cs)
        for entry, raw_entry in zip(table, raw):
            sectors = oracle_sectors(raw_entry, workflow, cs)
            assert (entry.phase1_pos_cost, entry.phase1_neg_cost,
                    entry.phase2_pos_cost, entry.phase2_neg_cost) == sectors


@given(lam=st.floats(min_value=0.01, max_value=50))
def test_scaling_all_costs_scales_total(lam):
    record = synth_record("two_phase", [(50, 5, 200, 10), (90, 9, 40, 4), (130, 13, 0, 0)])
    base = CostStructure(10, 10, 1, 1)
    scaled = CostStructure(10 * lam, 10 * lam, lam, lam)
    best_base, arg_base = optimal_cost(record, base)
    best_scaled, arg_scaled = optimal_cost(record, scaled)
    assert best_scaled == pytest.approx(lam * best_base, rel=1e-12)
    assert arg_base == arg_scaled


def test_csv_writers(tmp_path):
    record = synth_record("two_phase", [(10, 2, 8, 1), (20, 6, 0, 0)])
    table = cost_dynamics_table(record, EXPENSIVE_TRAINING)
    dyn_path = tmp_path / "dyn.csv"
    write_dynamics_csv(table, dyn_path)
    lines = dyn_path.read_text().strip().splitlines()
    assert lines[0] == "iteration,p1_pos,p1_neg,p2_pos,p2_neg,total,depth_zero_flag"
    assert len(lines) == 3
    assert lines[1].split(",") == ["0", "20", "80", "1", "7", "108", "0"]

    runs_path = tmp_path / "runs.csv"
    write_run_costs_csv([("cat", 0, "bm25", "two_phase", 108.0, 0)], runs_path)
    lines = runs_path.read_text().strip().splitlines()
    assert lines[0] == "category,seed_set,feature_mode,workflow,optimal_cost,argmin_iteration"
    assert lines[1] == "cat,0,bm25,two_phase,108,0"
