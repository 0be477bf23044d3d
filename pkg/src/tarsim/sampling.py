"""Batch selection strategies for the review loop.

All three selectors are pure functions over (candidate indices, scores) and
break ties by lower document row index, so a run is fully reproducible from
its config.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STRATEGIES = ("relevance", "uncertainty", "random")

DEFAULT_BATCH_SIZE = 200


@dataclass(frozen=True)
class BatchRequest:
    strategy: str
    batch_size: int = DEFAULT_BATCH_SIZE
    rng_seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def select_relevance(indices: np.ndarray, scores: np.ndarray, k: int) -> np.ndarray:
    """Top-k candidates by descending score, ties by lower row index."""
    indices = np.asarray(indices)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((indices, -scores))
    return indices[order[: min(k, indices.size)]]


def select_uncertainty(indices: np.ndarray, scores: np.ndarray, k: int) -> np.ndarray:
    """k candidates with probability closest to 0.5, ties by lower row index."""
    indices = np.asarray(indices)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((indices, np.abs(scores - 0.5)))
    return indices[order[: min(k, indices.size)]]


def select_random(indices: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample without replacement; returns all (shuffled) when k >= |candidates|."""
    indices = np.asarray(indices)
    return rng.permutation(indices)[: min(k, indices.size)]


def select_batch(
    strategy: str, indices: np.ndarray, scores: np.ndarray | None, k: int, rng: np.random.Generator
) -> np.ndarray:
    if strategy == "relevance":
        return select_relevance(indices, scores, k)
    if strategy == "uncertainty":
        return select_uncertainty(indices, scores, k)
    if strategy == "random":
        return select_random(indices, k, rng)
    raise ValueError(f"unknown strategy {strategy!r}")
