"""One simulated review run: seeds, retrain/score/sample loop, stopping, record.

A run replays gold labels as the human reviewer. Each iteration retrains the
classifier (two classifiers in fused mode, their probabilities averaged) on
everything reviewed so far, scores the collection, samples the next batch,
and reveals its labels. One-phase runs stop when true recall meets the
target; two-phase runs additionally record, at every iteration, how deep the
current ranking must be reviewed to reach the target.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classifier import LogRegModel, TrainConfig, predict_proba, train
from .corpus import CategoryLabels, LabeledCollection
from .features import SparseMatrix
from .sampling import DEFAULT_BATCH_SIZE, select_batch

WORKFLOWS = ("one_phase", "two_phase")
FEATURE_MODES = ("bm25", "splade", "fused")
DEFAULT_RECALL_TARGET = 0.8
DEFAULT_TWO_PHASE_MAX_ITERATIONS = 200

_DEFAULT_STRATEGY = {"one_phase": "relevance", "two_phase": "uncertainty"}

_RECORD_VERSION = 1


class RunAborted(RuntimeError):
    """A run could not start or proceed (no eligible seeds, bad matrices)."""


@dataclass(frozen=True)
class RunConfig:
    category_id: str
    workflow: str
    feature_mode: str
    strategy: str | None = None
    recall_target: float = DEFAULT_RECALL_TARGET
    batch_size: int = DEFAULT_BATCH_SIZE
    max_iterations: int | None = None
    seed_set_id: int = 0
    rng_seed: int = 0
    warm_start: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.workflow not in WORKFLOWS:
            raise ValueError(f"unknown workflow {self.workflow!r}")
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")
        if not 0 < self.recall_target <= 1:
            raise ValueError("recall_target must be in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.seed_set_id < 0 or self.rng_seed < 0:
            raise ValueError("seed_set_id and rng_seed must be nonnegative")

    @property
    def resolved_strategy(self) -> str:
        return self.strategy or _DEFAULT_STRATEGY[self.workflow]

    @property
    def resolved_max_iterations(self) -> int | None:
        if self.max_iterations is not None:
            return self.max_iterations
        return DEFAULT_TWO_PHASE_MAX_ITERATIONS if self.workflow == "two_phase" else None


@dataclass
class ReviewState:
    """Mutable per-run state: which rows are reviewed, found-relevant count."""

    reviewed: list[tuple[int, int, int]]  # (row, gold label, iteration revealed)
    reviewed_mask: np.ndarray
    found_relevant: int = 0

    @classmethod
    def fresh(cls, n_docs: int) -> "ReviewState":
        return cls(reviewed=[], reviewed_mask=np.zeros(n_docs, dtype=bool))

    def reveal(self, rows: Sequence[int], gold: np.ndarray, iteration: int) -> int:
        """Mark rows reviewed at this iteration; returns positives in the batch."""
        batch_pos = 0
        for row in rows:
            row = int(row)
            if self.reviewed_mask[row]:
                raise RunAborted(f"row {row} revealed twice")
            label = int(gold[row])
            self.reviewed.append((row, label, iteration))
            self.reviewed_mask[row] = True
            batch_pos += label
        self.found_relevant += batch_pos
        return batch_pos

    def unreviewed_rows(self) -> np.ndarray:
        return np.flatnonzero(~self.reviewed_mask)

    def reviewed_rows_sorted(self) -> np.ndarray:
        return np.flatnonzero(self.reviewed_mask)


@dataclass(frozen=True)
class IterationEntry:
    iteration: int
    batch_doc_ids: tuple[str, ...]
    batch_positives: int
    cum_reviewed: int
    cum_positives: int
    phase2_depth: int | None = None
    phase2_positives: int | None = None


@dataclass(frozen=True)
class RunRecord:
    config: RunConfig
    seed_docs: tuple[str, str]
    total_positives: int
    target_reached: bool
    iterations: tuple[IterationEntry, ...]

    @property
    def category_id(self) -> str:
        return self.config.category_id

    @property
    def final(self) -> IterationEntry:
        return self.iterations[-1]


def required_positive_count(total_positives: int, target: float) -> int:
    """Smallest integer c with c / total_positives >= target.

    Computed with explicit boundary fixups so float rounding of the ratio can
    never shift the stopping point.
    """
    if total_positives <= 0:
        return 0
    c = min(total_positives, math.ceil(target * total_positives))
    while c > 0 and (c - 1) / total_positives >= target:
        c -= 1
    while c < total_positives and c / total_positives < target:
        c += 1
    return c


def _entropy_for(category_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(category_id.encode("utf-8"), digest_size=8).digest(), "big")


def seed_selection_rng(rng_seed: int, category_id: str, seed_set_id: int) -> np.random.Generator:
    """RNG for seed-document selection.

    Keyed only by (rng_seed, category, seed_set_id): every feature mode,
    strategy, and workflow sharing those values draws the same seed pair.
    """
    return np.random.default_rng([rng_seed, _entropy_for(category_id), seed_set_id, 1])


def batch_sampling_rng(rng_seed: int, category_id: str, seed_set_id: int) -> np.random.Generator:
    """RNG for random-strategy batch draws, independent of the seed-pair stream."""
    return np.random.default_rng([rng_seed, _entropy_for(category_id), seed_set_id, 2])


def select_seeds(
    collection: LabeledCollection, category: CategoryLabels, rng: np.random.Generator
) -> tuple[int, int]:
    """One uniform positive and one uniform negative row; empty docs ineligible."""
    pos_rows: list[int] = []
    neg_rows: list[int] = []
    for i, doc in enumerate(collection.documents):
        if not doc.tokens:
            continue
        if doc.doc_id in category.positives:
            pos_rows.append(i)
        else:
            neg_rows.append(i)
    if not pos_rows:
        raise RunAborted(f"category {category.category_id}: no eligible positive seed document")
    if not neg_rows:
        raise RunAborted(f"category {category.category_id}: no eligible negative seed document")
    pos = pos_rows[int(rng.integers(len(pos_rows)))]
    neg = neg_rows[int(rng.integers(len(neg_rows)))]
    return pos, neg


def fuse_scores(p_first: np.ndarray, p_second: np.ndarray) -> np.ndarray:
    """Elementwise mean of two aligned probability vectors."""
    p_first = np.asarray(p_first, dtype=np.float64)
    p_second = np.asarray(p_second, dtype=np.float64)
    if p_first.shape != p_second.shape:
        raise ValueError(f"score length mismatch: {p_first.shape} vs {p_second.shape}")
    return (p_first + p_second) / 2.0


def _depth_and_positives(
    scores: np.ndarray, labels: np.ndarray, indices: np.ndarray, needed: int
) -> tuple[int | None, int]:
    """Shortest prefix of the (-score, index)-sorted list holding `needed` positives."""
    if needed <= 0:
        return 0, 0
    if scores.size == 0:
        return None, 0
    order = np.lexsort((indices, -np.asarray(scores, dtype=np.float64)))
    csum = np.cumsum(np.asarray(labels)[order])
    at = int(np.searchsorted(csum, needed, side="left"))
    if at == csum.size:
        return None, 0
    depth = at + 1
    return depth, int(csum[at])


def rank_depth_to_target(
    scores: np.ndarray,
    labels: np.ndarray,
    found_in_phase1: int,
    total_positives: int,
    target: float,
    indices: np.ndarray | None = None,
) -> int | None:
    """Documents to review down the ranking before recall reaches the target.

    ``scores``/``labels`` cover the unreviewed documents; ties in score break
    by lower row index (pass ``indices`` when positional order differs from
    row order). Returns 0 when phase 1 already meets the target and None when
    even exhausting the list cannot (impossible with complete gold labels).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if indices is None:
        indices = np.arange(scores.size)
    required = required_positive_count(total_positives, target)
    depth, _ = _depth_and_positives(scores, labels, np.asarray(indices), required - found_in_phase1)
    return depth


def _score_all(
    models: dict[str, LogRegModel], matrices: Mapping[str, SparseMatrix]
) -> np.ndarray:
    families = sorted(models)
    probas = [predict_proba(models[f], matrices[f]) for f in families]
    if len(probas) == 1:
        return probas[0]
    return fuse_scores(probas[0], probas[1])


def run_tar(
    config: RunConfig,
    collection: LabeledCollection,
    matrices: Mapping[str, SparseMatrix],
) -> RunRecord:
    """Execute one review run for one category and return its full record."""
    families = ("bm25", "splade") if config.feature_mode == "fused" else (config.feature_mode,)
    for fam in families:
        if fam not in matrices:
            raise RunAborted(f"feature_mode {config.feature_mode!r} needs a {fam!r} matrix")
        if matrices[fam].n_rows != collection.n_docs:
            raise RunAborted(
                f"{fam} matrix has {matrices[fam].n_rows} rows for {collection.n_docs} documents"
            )
    if config.category_id not in collection.categories:
        raise RunAborted(f"unknown category {config.category_id!r}")
    category = collection.categories[config.category_id]

    docs = collection.documents
    n_docs = collection.n_docs
    gold = np.zeros(n_docs, dtype=np.int8)
    pos_set = category.positives
    for i, doc in enumerate(docs):
        if doc.doc_id in pos_set:
            gold[i] = 1
    total_positives = int(gold.sum())
    required = required_positive_count(total_positives, config.recall_target)

    seed_rng = seed_selection_rng(config.rng_seed, config.category_id, config.seed_set_id)
    pos_seed, neg_seed = select_seeds(collection, category, seed_rng)
    rng = batch_sampling_rng(config.rng_seed, config.category_id, config.seed_set_id)

    state = ReviewState.fresh(n_docs)
    two_phase = config.workflow == "two_phase"
    strategy = config.resolved_strategy
    max_iterations = config.resolved_max_iterations
    entries: list[IterationEntry] = []

    def record_iteration(iteration: int, batch_rows: Sequence[int], batch_pos: int,
                         remaining_scores: np.ndarray | None) -> None:
        depth = p2pos = None
        if two_phase:
            remaining = state.unreviewed_rows()
            if remaining_scores is None:
                # No classifier exists yet (seed iteration): rank in row order,
                # which is what uniform scores with index tie-break produce.
                scores_r = np.full(remaining.size, 0.5)
            else:
                scores_r = remaining_scores
            depth, p2pos = _depth_and_positives(
                scores_r, gold[remaining], remaining, required - state.found_relevant
            )
        entries.append(
            IterationEntry(
                iteration=iteration,
                batch_doc_ids=tuple(docs[int(r)].doc_id for r in batch_rows),
                batch_positives=batch_pos,
                cum_reviewed=len(state.reviewed),
                cum_positives=state.found_relevant,
                phase2_depth=depth,
                phase2_positives=p2pos,
            )
        )

    # Iteration 0: the seed pair is revealed, no model yet.
    seed_rows = [pos_seed, neg_seed]
    batch_pos = state.reveal(seed_rows, gold, iteration=0)
    record_iteration(0, seed_rows, batch_pos, None)

    models: dict[str, LogRegModel] = {}
    iteration = 0
    while True:
        if state.found_relevant >= required:
            break
        if state.unreviewed_rows().size == 0:
            break
        if max_iterations is not None and iteration >= max_iterations:
            break
        iteration += 1

        reviewed_rows = state.reviewed_rows_sorted()
        labels = gold[reviewed_rows]
        for fam in families:
            warm = models.get(fam) if config.warm_start else None
            models[fam] = train(matrices[fam], reviewed_rows, labels, config.train, warm_start_from=warm)
        all_scores = _score_all({f: models[f] for f in families}, matrices)

        candidates = state.unreviewed_rows()
        batch = select_batch(strategy, candidates, all_scores[candidates], config.batch_size, rng)
        batch_pos = state.reveal(batch, gold, iteration)
        remaining = state.unreviewed_rows()
        record_iteration(iteration, batch, batch_pos, all_scores[remaining])

    return RunRecord(
        config=config,
        seed_docs=(docs[pos_seed].doc_id, docs[neg_seed].doc_id),
        total_positives=total_positives,
        target_reached=state.found_relevant >= required,
        iterations=tuple(entries),
    )


def _config_to_dict(config: RunConfig) -> dict:
    d = asdict(config)
    return d


def _config_from_dict(d: dict) -> RunConfig:
    d = dict(d)
    d["train"] = TrainConfig(**d.get("train", {}))
    return RunConfig(**d)


def save_run_record(record: RunRecord, path: str | Path) -> None:
    """Serialize as JSONL: a header line plus one line per iteration.

    Key order and separators are pinned so identical runs serialize to
    byte-identical files.
    """
    lines = []
    header = {
        "type": "header",
        "version": _RECORD_VERSION,
        "config": _config_to_dict(record.config),
        "seed_docs": list(record.seed_docs),
        "total_positives": record.total_positives,
        "target_reached": record.target_reached,
    }
    lines.append(json.dumps(header, sort_keys=True, separators=(",", ":")))
    for entry in record.iterations:
        lines.append(
            json.dumps(
                {
                    "type": "iteration",
                    "iteration": entry.iteration,
                    "batch_doc_ids": list(entry.batch_doc_ids),
                    "batch_positives": entry.batch_positives,
                    "cum_reviewed": entry.cum_reviewed,
                    "cum_positives": entry.cum_positives,
                    "phase2_depth": entry.phase2_depth,
                    "phase2_positives": entry.phase2_positives,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_run_record(path: str | Path) -> RunRecord:
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("type") != "header":
        raise ValueError(f"{path}: not a run record file")
    header = lines[0]
    if header.get("version") != _RECORD_VERSION:
        raise ValueError(f"{path}: unsupported record version {header.get('version')}")
    entries = []
    for obj in lines[1:]:
        if obj.get("type") != "iteration":
            raise ValueError(f"{path}: unexpected line type {obj.get('type')!r}")
        entries.append(
            IterationEntry(
                iteration=obj["iteration"],
                batch_doc_ids=tuple(obj["batch_doc_ids"]),
                batch_positives=obj["batch_positives"],
                cum_reviewed=obj["cum_reviewed"],
                cum_positives=obj["cum_positives"],
                phase2_depth=obj["phase2_depth"],
                phase2_positives=obj["phase2_positives"],
            )
        )
    return RunRecord(
        config=_config_from_dict(header["config"]),
        seed_docs=tuple(header["seed_docs"]),
        total_positives=header["total_positives"],
        target_reached=header["target_reached"],
        iterations=tuple(entries),
    )
