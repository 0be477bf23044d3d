import numpy as np
import pytest
from hypothesis import given, strategies as st

from tarsim.sampling import (
    BatchRequest,
    select_random,
    select_relevance,
    select_uncertainty,
)


class TestRelevance:
    def test_top_1(self):
        picked = select_relevance(np.array([0, 1, 2]), np.array([0.9, 0.5, 0.1]), 1)
        assert picked.tolist() == [0]

    def test_tie_breaks_by_index(self):
        picked = select_relevance(np.array([0, 1]), np.array([0.5, 0.5]), 1)
        assert picked.tolist() == [0]

    def test_exhaustion(self):
        picked = select_relevance(np.array([4, 7, 9]), np.array([0.3, 0.2, 0.1]), 10)
        assert picked.tolist() == [4, 7, 9]

    def test_output_sorted_by_score_then_index(self):
        idx = np.array([3, 5, 8, 11])
        scores = np.array([0.2, 0.9, 0.9, 0.4])
        picked = select_relevance(idx, scores, 3)
        assert picked.tolist() == [5, 8, 11]

    @given(
        st.lists(st.floats(min_value=0, max_value=1, allow_nan=False), min_size=1, max_size=40),
        st.integers(min_value=1, max_value=20),
    )
    def test_prefix_consistency(self, scores, k):
        indices = np.arange(len(scores))
        scores = np.array(scores)
        first = select_relevance(indices, scores, k)
        mask = np.isin(indices, first, invert=True)
        second = select_relevance(indices[mask], scores[mask], k) if mask.any() else np.array([], dtype=int)
        both = set(first.tolist()) | set(second.tolist())
        assert both == set(select_relevance(indices, scores, 2 * k).tolist())


class TestUncertainty:
    def test_closest_to_half(self):
        picked = select_uncertainty(np.array([0, 1, 2]), np.array([0.9, 0.5, 0.1]), 1)
        assert picked.tolist() == [1]

    def test_equal_distance_tie(self):
        picked = select_uncertainty(np.array([0, 1]), np.array([0.4, 0.6]), 1)
        assert picked.tolist() == [0]

    def test_hand_ordering(self):
        # |p - 0.5| = 0.05, 0.20, 0.02 -> doc2 then doc0
        picked = select_uncertainty(np.array([0, 1, 2]), np.array([0.45, 0.7, 0.52]), 2)
        assert picked.tolist() == [2, 0]


class TestRandom:
    def test_same_seed_same_batch(self):
        idx = np.arange(50)
        a = select_random(idx, 10, np.random.default_rng(99))
        b = select_random(idx, 10, np.random.default_rng(99))
        assert a.tolist() == b.tolist()

    def test_k_at_least_population(self):
        idx = np.array([2, 4, 6])
        picked = select_random(idx, 5, np.random.default_rng(1))
        assert sorted(picked.tolist()) == [2, 4, 6]

    def test_no_duplicates(self):
        idx = np.arange(30)
        picked = select_random(idx, 20, np.random.default_rng(2))
        assert len(set(picked.tolist())) == 20

    def test_uniform_frequency(self):
        idx = np.arange(4)
        rng = np.random.default_rng(3)
        counts = np.zeros(4, dtype=int)
        trials = 10_000
        for _ in range(trials):
            counts[select_random(idx, 1, rng)[0]] += 1
        expected = trials / 4
        assert np.all(np.abs(counts - expected) <= 0.05 * expected)


def test_batch_request_validation():
    BatchRequest("relevance")
    with pytest.raises(ValueError):
        BatchRequest("greedy")
    with pytest.raises(ValueError):
        BatchRequest("relevance", batch_size=0)


def test_batch_request_default_size():
    assert BatchRequest("uncertainty").batch_size == 200
