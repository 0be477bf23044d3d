import numpy as np
import pytest
from hypothesis import given, strategies as st

from tarsim.classifier import TrainConfig
from tarsim.workflow import (
    RunAborted,
    RunConfig,
    batch_sampling_rng,
    fuse_scores,
    load_run_record,
    rank_depth_to_target,
    required_positive_count,
    run_tar,
    save_run_record,
    seed_selection_rng,
    select_seeds,
)

from conftest import dense_to_matrix, make_collection


def make_run_config(**overrides):
    base = dict(category_id="metals", workflow="one_phase", feature_mode="bm25",
                batch_size=2, seed_set_id=0, rng_seed=11)
    base.update(overrides)
    return RunConfig(**base)


class TestRequiredPositiveCount:
    def test_classic_ceiling(self):
        assert required_positive_count(5, 0.8) == 4
        assert required_positive_count(10, 0.8) == 8
        assert required_positive_count(12, 0.8) == 10

    def test_full_target(self):
        assert required_positive_count(7, 1.0) == 7

    def test_single_positive(self):
        assert required_positive_count(1, 0.8) == 1

    @given(
        total=st.integers(min_value=1, max_value=10_000),
        target=st.floats(min_value=1e-6, max_value=1.0),
    )
    def test_minimality(self, total, target):
        c = required_positive_count(total, target)
        assert 1 <= c <= total
        assert c / total >= target
        if c > 1:
            assert (c - 1) / total < target


class TestSelectSeeds:
    def test_only_pair(self, tmp_path):
        coll = make_collection(tmp_path, [("p", "x"), ("n", "y")], [("c", "p", 1), ("c", "n", 0)])
        rng = np.random.default_rng(0)
        assert select_seeds(coll, coll.categories["c"], rng) == (0, 1)

    def test_empty_token_docs_ineligible(self, tmp_path):
        coll = make_collection(
            tmp_path,
            [("p1", ""), ("p2", "x"), ("n1", ""), ("n2", "y")],
            [("c", "p1", 1), ("c", "p2", 1), ("c", "n1", 0)],
        )
        for trial in range(20):
            pos, neg = select_seeds(coll, coll.categories["c"], np.random.default_rng(trial))
            assert (pos, neg) == (1, 3)

    def test_no_eligible_positive(self, tmp_path):
        coll = make_collection(tmp_path, [("p", ""), ("n", "y")], [("c", "p", 1), ("c", "n", 0)])
        with pytest.raises(RunAborted, match="no eligible positive"):
            select_seeds(coll, coll.categories["c"], np.random.default_rng(0))

    def test_shared_across_modes_and_workflows(self, toy_collection):
        # the rng is keyed by (rng_seed, category, seed_set) only
        draws = {
            select_seeds(toy_collection, toy_collection.categories["metals"],
                         seed_selection_rng(7, "metals", 3))
            for _ in range(5)
        }
        assert len(draws) == 1

    def test_uniform_over_positives(self, toy_collection):
        category = toy_collection.categories["metals"]
        counts = {}
        trials = 6000
        for seed_set in range(trials):
            pos, _ = select_seeds(toy_collection, category,
                                  seed_selection_rng(0, "metals", seed_set))
            counts[pos] = counts.get(pos, 0) + 1
        expected = trials / 3  # three eligible positives
        for row, count in counts.items():
            assert abs(count - expected) <= 0.05 * expected, counts


class TestFuseScores:
    def test_equal_inputs(self):
        p = np.array([0.1, 0.9])
        np.testing.assert_array_equal(fuse_scores(p, p), p)

    def test_mean(self):
        assert fuse_scores(np.array([0.2]), np.array([0.8]))[0] == pytest.approx(0.5)

    def test_fused_ranking_differs_from_both(self):
        p1 = np.array([0.9, 0.1, 0.5])
        p2 = np.array([0.1, 0.8, 0.6])
        fused = fuse_scores(p1, p2)
        np.testing.assert_allclose(fused, [0.5, 0.45, 0.55])
        assert int(np.argmax(fused)) == 2
        assert int(np.argmax(p1)) == 0 and int(np.argmax(p2)) == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            fuse_scores(np.zeros(2), np.zeros(3))

    @given(st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=20))
    def test_commutes(self, values):
        p1 = np.array(values)
        p2 = p1[::-1].copy()
        np.testing.assert_array_equal(fuse_scores(p1, p2), fuse_scores(p2, p1))


class TestRankDepthToTarget:
    def test_already_met(self):
        depth = rank_depth_to_target(np.array([0.9]), np.array([1]), 8, 10, 0.8)
        assert depth == 0

    def test_hand_ranked_example(self):
        # 10 unreviewed docs, positives land at ranks 3 and 7 after sorting
        scores = np.linspace(1.0, 0.1, 10)
        labels = np.zeros(10, dtype=int)
        labels[2] = 1
        labels[6] = 1
        depth = rank_depth_to_target(scores, labels, 6, 10, 0.8)
        assert depth == 7

    def test_unreachable_returns_none(self):
        depth = rank_depth_to_target(np.array([0.5, 0.4]), np.array([0, 0]), 6, 10, 0.8)
        assert depth is None

    def test_ties_resolved_by_index(self):
        scores = np.array([0.5, 0.5, 0.5])
        # positive at the lowest index: depth 1 despite equal scores
        depth = rank_depth_to_target(scores, np.array([1, 0, 0]), 7, 10, 0.8)
        assert depth == 1
        depth = rank_depth_to_target(scores, np.array([0, 0, 1]), 7, 10, 0.8)
        assert depth == 3

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            n = int(rng.integers(1, 60))
            scores = rng.random(n)
            labels = (rng.random(n) < 0.3).astype(int)
            total = int(labels.sum()) + int(rng.integers(0, 5))
            found = int(rng.integers(0, total + 1)) if total else 0
            target = float(rng.uniform(0.05, 1.0))
            required = required_positive_count(total, target)
            order = np.lexsort((np.arange(n), -scores))
            expected = 0 if found >= required else None
            if expected is None:
                got_count = found
                for d, row in enumerate(order, start=1):
                    got_count += labels[row]
                    if got_count >= required:
                        expected = d
                        break
            assert rank_depth_to_target(scores, labels, found, total, target) == expected


class TestRunTar:
    def test_seeds_alone_meet_target(self, tmp_path):
        coll = make_collection(tmp_path, [("p", "x x"), ("n", "y y"), ("m", "z z")],
                               [("c", "p", 1), ("c", "n", 0)])
        mat = dense_to_matrix(np.eye(3))
        record = run_tar(make_run_config(category_id="c", batch_size=1), coll, {"bm25": mat})
        assert record.target_reached
        assert len(record.iterations) == 1
        assert record.final.cum_reviewed == 2
        assert record.final.cum_positives == 1

    def test_batch_covers_collection(self, toy_collection):
        mat = dense_to_matrix(np.eye(6))
        record = run_tar(
            make_run_config(batch_size=100, recall_target=1.0), toy_collection, {"bm25": mat}
        )
        assert record.target_reached
        assert record.final.cum_reviewed == 6
        assert record.final.cum_positives == record.total_positives == 3
        assert len(record.iterations) == 2  # seeds + one exhaustive batch

    def test_cumulative_counts_monotone(self, toy_collection):
        mat = dense_to_matrix(np.random.default_rng(0).random((6, 4)))
        record = run_tar(make_run_config(batch_size=1), toy_collection, {"bm25": mat})
        reviewed = [e.cum_reviewed for e in record.iterations]
        positives = [e.cum_positives for e in record.iterations]
        assert reviewed == sorted(reviewed)
        assert positives == sorted(positives)
        assert record.target_reached

    def test_two_phase_depth_zero_iff_recall_met(self, toy_collection):
        mat = dense_to_matrix(np.random.default_rng(1).random((6, 4)))
        record = run_tar(
            make_run_config(workflow="two_phase", batch_size=1), toy_collection, {"bm25": mat}
        )
        required = required_positive_count(record.total_positives, record.config.recall_target)
        for entry in record.iterations:
            assert entry.phase2_depth is not None
            assert (entry.phase2_depth == 0) == (entry.cum_positives >= required)

    def test_one_phase_max_iterations_flagged(self, toy_collection):
        mat = dense_to_matrix(np.random.default_rng(2).random((6, 4)))
        record = run_tar(
            make_run_config(batch_size=1, max_iterations=1), toy_collection, {"bm25": mat}
        )
        assert not record.target_reached
        assert len(record.iterations) == 2

    def test_missing_matrix_rejected(self, toy_collection):
        with pytest.raises(RunAborted, match="splade"):
            run_tar(make_run_config(feature_mode="fused"),
                    toy_collection, {"bm25": dense_to_matrix(np.eye(6))})

    def test_unknown_category(self, toy_collection):
        with pytest.raises(RunAborted, match="unknown category"):
            run_tar(make_run_config(category_id="nope"),
                    toy_collection, {"bm25": dense_to_matrix(np.eye(6))})

    def test_fused_requires_and_uses_both(self, toy_collection):
        rng = np.random.default_rng(3)
        mats = {"bm25": dense_to_matrix(rng.random((6, 4))),
                "splade": dense_to_matrix(rng.random((6, 5)), family="splade")}
        record = run_tar(make_run_config(feature_mode="fused", batch_size=1),
                         toy_collection, mats)
        assert record.target_reached

    def test_determinism_byte_identical(self, toy_collection, tmp_path):
        mat = dense_to_matrix(np.random.default_rng(4).random((6, 4)))
        config = make_run_config(workflow="two_phase", batch_size=1)
        paths = []
        for name in ("a.jsonl", "b.jsonl"):
            record = run_tar(config, toy_collection, {"bm25": mat})
            path = tmp_path / name
            save_run_record(record, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_record_roundtrip(self, toy_collection, tmp_path):
        mat = dense_to_matrix(np.random.default_rng(5).random((6, 4)))
        config = make_run_config(batch_size=2, train=TrainConfig(C=0.5))
        record = run_tar(config, toy_collection, {"bm25": mat})
        path = tmp_path / "r.jsonl"
        save_run_record(record, path)
        assert load_run_record(path) == record

    def test_random_strategy_deterministic(self, toy_collection):
        mat = dense_to_matrix(np.random.default_rng(6).random((6, 4)))
        config = make_run_config(strategy="random", batch_size=2)
        r1 = run_tar(config, toy_collection, {"bm25": mat})
        r2 = run_tar(config, toy_collection, {"bm25": mat})
        assert r1 == r2


def test_run_config_validation():
    with pytest.raises(ValueError, match="workflow"):
        make_run_config(workflow="three_phase")
    with pytest.raises(ValueError, match="feature_mode"):
        make_run_config(feature_mode="dense")
    with pytest.raises(ValueError, match="recall_target"):
        make_run_config(recall_target=0.0)
    with pytest.raises(ValueError, match="batch_size"):
        make_run_config(batch_size=0)


def test_run_config_strategy_defaults():
    assert make_run_config(workflow="one_phase").resolved_strategy == "relevance"
    assert make_run_config(workflow="two_phase").resolved_strategy == "uncertainty"
    assert make_run_config(workflow="two_phase").resolved_max_iterations == 200
    assert make_run_config(workflow="one_phase").resolved_max_iterations is None
    assert make_run_config(strategy="random").resolved_strategy == "random"


def test_rng_streams_are_distinct():
    a = seed_selection_rng(0, "cat", 0).integers(1 << 30)
    b = batch_sampling_rng(0, "cat", 0).integers(1 << 30)
    assert a != b
