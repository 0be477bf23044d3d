"""Experiment orchestration: config, run grid, manifest, reports.

An experiment is a JSON config describing corpus/label/vector paths and the
grid (categories x seed sets x feature modes x workflow specs). Each run
writes one record file; a manifest keyed by config hash makes reruns
resumable. Aggregation and chart emission are pure functions of the record
files, so re-running them reproduces reports byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .classifier import TrainConfig
from .corpus import LabeledCollection, load_category_groups, load_corpus, load_labels
from .cost import (
    COST_PRESETS,
    CostStructure,
    cost_dynamics_table,
    optimal_cost,
    relative_cost,
    write_dynamics_csv,
    write_run_costs_csv,
)
from .features import (
    DEFAULT_B,
    DEFAULT_K1,
    DEFAULT_VOCAB_SIZE,
    SparseMatrix,
    encode_bm25,
    load_matrix_cache,
    load_sparse_vectors,
)
from .workflow import RunConfig, load_run_record, run_tar, save_run_record

WORKERS_ENV_VAR = "TARSIM_WORKERS"

_MANIFEST_VERSION = 1
_CONFIG_VERSION = 1


@dataclass(frozen=True)
class WorkflowSpec:
    """One workflow/strategy/cost-structure combination to run and evaluate."""

    workflow: str
    strategy: str | None = None
    cost: CostStructure = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.cost is None:
            # Default pairing: flat costs for one-phase review, ten-fold
            # training costs for two-phase.
            preset = "uniform" if self.workflow == "one_phase" else "expensive_training"
            object.__setattr__(self, "cost", COST_PRESETS[preset])

    @property
    def key(self) -> str:
        return f"{self.workflow}:{self.strategy or 'default'}"


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: str
    labels: str
    output_dir: str
    vectors: str | None = None
    groups: str | None = None
    bm25_cache: str | None = None
    categories: tuple[str, ...] | None = None
    feature_modes: tuple[str, ...] = ("bm25",)
    workflows: tuple[WorkflowSpec, ...] = (WorkflowSpec("one_phase"),)
    recall_target: float = 0.8
    batch_size: int = 200
    max_iterations: int | None = None
    seed_sets: int = 10
    rng_seed: int = 0
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    vocab_size: int = DEFAULT_VOCAB_SIZE
    top_s: int | None = None
    l2_normalize: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)
    parallelism: int = 1

    def validate(self) -> None:
        if self.seed_sets < 1:
            raise ValueError("seed_sets must be >= 1")
        for label, path in [("corpus", self.corpus), ("labels", self.labels),
                            ("vectors", self.vectors), ("groups", self.groups),
                            ("bm25_cache", self.bm25_cache)]:
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"{label} path does not exist: {path}")
        needs_vectors = any(m in ("splade", "fused") for m in self.feature_modes)
        if needs_vectors and self.vectors is None:
            raise ValueError("feature modes using learned sparse vectors require a vectors path")

    def semantic_dict(self) -> dict:
        """Fields that affect run results (not parallelism or output layout)."""
        return {
            "version": _CONFIG_VERSION,
            "corpus": self.corpus,
            "labels": self.labels,
            "vectors": self.vectors,
            "groups": self.groups,
            "bm25_cache": self.bm25_cache,
            "categories": list(self.categories) if self.categories is not None else None,
            "feature_modes": list(self.feature_modes),
            "workflows": [
                {"workflow": w.workflow, "strategy": w.strategy, "cost": list(w.cost.as_tuple())}
                for w in self.workflows
            ],
            "recall_target": self.recall_target,
            "batch_size": self.batch_size,
            "max_iterations": self.max_iterations,
            "seed_sets": self.seed_sets,
            "rng_seed": self.rng_seed,
            "k1": self.k1,
            "b": self.b,
            "vocab_size": self.vocab_size,
            "top_s": self.top_s,
            "l2_normalize": self.l2_normalize,
            "train": {
                "C": self.train.C,
                "max_iterations": self.train.max_iterations,
                "gradient_tolerance": self.train.gradient_tolerance,
                "positive_class_weight": self.train.positive_class_weight,
                "history": self.train.history,
            },
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _parse_cost(value) -> CostStructure:
    if isinstance(value, str):
        if value not in COST_PRESETS:
            raise ValueError(f"unknown cost preset {value!r} (have {sorted(COST_PRESETS)})")
        return COST_PRESETS[value]
    if isinstance(value, (list, tuple)) and len(value) == 4:
        return CostStructure(*[float(v) for v in value])
    raise ValueError(f"cost must be a preset name or a 4-element list, got {value!r}")


def load_experiment_config(path: str | Path, output_dir: str | None = None) -> ExperimentConfig:
    """Read the versioned JSON experiment config; CLI may override output_dir."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    version = raw.get("version", _CONFIG_VERSION)
    if version != _CONFIG_VERSION:
        raise ValueError(f"unsupported config version {version}")
    base = Path(path).parent

    def resolve(p):
        if p is None:
            return None
        p = Path(p)
        return str(p if p.is_absolute() else base / p)

    workflows = []
    for w in raw.get("workflows", [{"workflow": "one_phase"}]):
        workflows.append(
            WorkflowSpec(
                workflow=w["workflow"],
                strategy=w.get("strategy"),
                cost=_parse_cost(w["cost"]) if "cost" in w else None,
            )
        )
    train_raw = raw.get("train", {})
    config = ExperimentConfig(
        corpus=resolve(raw["corpus"]),
        labels=resolve(raw["labels"]),
        output_dir=output_dir or resolve(raw.get("output_dir")) or "runs",
        vectors=resolve(raw.get("vectors")),
        groups=resolve(raw.get("groups")),
        bm25_cache=resolve(raw.get("bm25_cache")),
        categories=tuple(raw["categories"]) if raw.get("categories") else None,
        feature_modes=tuple(raw.get("feature_modes", ["bm25"])),
        workflows=tuple(workflows),
        recall_target=float(raw.get("recall_target", 0.8)),
        batch_size=int(raw.get("batch_size", 200)),
        max_iterations=raw.get("max_iterations"),
        seed_sets=int(raw.get("seed_sets", 10)),
        rng_seed=int(raw.get("rng_seed", 0)),
        k1=float(raw.get("k1", DEFAULT_K1)),
        b=float(raw.get("b", DEFAULT_B)),
        vocab_size=int(raw.get("vocab_size", DEFAULT_VOCAB_SIZE)),
        top_s=raw.get("top_s"),
        l2_normalize=bool(raw.get("l2_normalize", False)),
        train=TrainConfig(**train_raw),
        parallelism=int(raw.get("parallelism", 1)),
    )
    return config


def load_collection(config: ExperimentConfig) -> LabeledCollection:
    collection = load_corpus(config.corpus)
    collection = load_labels(config.labels, collection)
    if config.groups:
        collection = load_category_groups(config.groups, collection)
    return collection


def build_matrices(config: ExperimentConfig, collection: LabeledCollection) -> dict[str, SparseMatrix]:
    families = set()
    for mode in config.feature_modes:
        families.update(("bm25", "splade") if mode == "fused" else (mode,))
    matrices: dict[str, SparseMatrix] = {}
    if "bm25" in families:
        if config.bm25_cache:
            matrix = load_matrix_cache(config.bm25_cache)
            if matrix.n_rows != collection.n_docs:
                raise ValueError(
                    f"bm25 cache has {matrix.n_rows} rows but collection has {collection.n_docs} documents"
                )
            matrices["bm25"] = matrix
        else:
            matrices["bm25"] = encode_bm25(collection, config.k1, config.b)
    if "splade" in families:
        matrices["splade"] = load_sparse_vectors(
            config.vectors, collection, config.vocab_size, config.top_s, config.l2_normalize
        )
    return matrices


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text)


@dataclass(frozen=True)
class GridItem:
    key: str
    filename: str
    run_config: RunConfig
    spec: WorkflowSpec


def build_grid(config: ExperimentConfig, collection: LabeledCollection) -> list[GridItem]:
    if config.categories is not None:
        missing = [c for c in config.categories if c not in collection.categories]
        if missing:
            raise ValueError(f"categories not in label file (or had no positives): {missing}")
        categories = list(config.categories)
    else:
        categories = sorted(collection.categories)
    items: list[GridItem] = []
    filenames: dict[str, str] = {}
    for category in categories:
        for seed_set in range(config.seed_sets):
            for mode in config.feature_modes:
                for spec in config.workflows:
                    key = f"{category}|s{seed_set}|{mode}|{spec.workflow}|{spec.strategy or 'default'}"
                    filename = _safe_name(key) + ".jsonl"
                    if filename in filenames:
                        if filenames[filename] == key:
                            raise ValueError(f"duplicate workflow spec produces run key {key!r} twice")
                        raise ValueError(f"record filename collision between {filenames[filename]!r} and {key!r}")
                    filenames[filename] = key
                    run_config = RunConfig(
                        category_id=category,
                        workflow=spec.workflow,
                        feature_mode=mode,
                        strategy=spec.strategy,
                        recall_target=config.recall_target,
                        batch_size=config.batch_size,
                        max_iterations=config.max_iterations,
                        seed_set_id=seed_set,
                        rng_seed=config.rng_seed,
                        train=config.train,
                    )
                    items.append(GridItem(key=key, filename=filename, run_config=run_config, spec=spec))
    return items


# Shared with forked pool workers; populated before the fork.
_WORKER_STATE: dict = {}


def _execute_item(item: GridItem) -> tuple[str, str, str | None]:
    collection = _WORKER_STATE["collection"]
    matrices = _WORKER_STATE["matrices"]
    records_dir: Path = _WORKER_STATE["records_dir"]
    try:
        record = run_tar(item.run_config, collection, matrices)
        save_run_record(record, records_dir / item.filename)
        return item.key, "done", None
    except Exception as exc:  # noqa: BLE001 - failures land in the manifest
        return item.key, "failed", f"{type(exc).__name__}: {exc}"


def _worker_count(config: ExperimentConfig) -> int:
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        return max(1, int(env))
    return max(1, config.parallelism)


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute the grid; returns the manifest dict (also written to disk).

    Runs already marked done in the manifest with their record file present
    are skipped, so a deleted record or an interrupted grid resumes cleanly.
    """
    config.validate()
    out_dir = Path(config.output_dir)
    records_dir = out_dir / "records"
    records_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.json"
    config_hash = config.config_hash()

    manifest = {
        "version": _MANIFEST_VERSION,
        "config_hash": config_hash,
        "config": config.semantic_dict(),
        "category_groups": {},
        "runs": {},
    }
    if manifest_path.exists():
        with open(manifest_path, encoding="utf-8") as fh:
            existing = json.load(fh)
        if existing.get("config_hash") != config_hash:
            raise ValueError(
                f"{manifest_path} belongs to a different configuration "
                f"(hash {existing.get('config_hash')!r} != {config_hash!r}); "
                "use a fresh output directory"
            )
        manifest["runs"] = existing.get("runs", {})

    collection = load_collection(config)
    matrices = build_matrices(config, collection)
    grid = build_grid(config, collection)
    for category_id, labels in sorted(collection.categories.items()):
        if labels.difficulty or labels.prevalence:
            manifest["category_groups"][category_id] = [labels.difficulty, labels.prevalence]

    pending: list[GridItem] = []
    for item in grid:
        info = manifest["runs"].get(item.key)
        if info and info.get("status") == "done" and (records_dir / info["file"]).exists():
            continue
        pending.append(item)

    def note(item: GridItem, status: str, error: str | None) -> None:
        manifest["runs"][item.key] = {
            "status": status,
            "file": item.filename,
            "error": error,
            "category": item.run_config.category_id,
            "seed_set": item.run_config.seed_set_id,
            "feature_mode": item.run_config.feature_mode,
            "workflow": item.spec.workflow,
            "strategy": item.spec.strategy,
            "cost": list(item.spec.cost.as_tuple()),
        }

    def flush() -> None:
        manifest_path.write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    _WORKER_STATE["collection"] = collection
    _WORKER_STATE["matrices"] = matrices
    _WORKER_STATE["records_dir"] = records_dir
    by_key = {item.key: item for item in pending}
    workers = _worker_count(config)
    try:
        if workers > 1 and len(pending) > 1 and "fork" in multiprocessing.get_all_start_methods():
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(processes=min(workers, len(pending))) as pool:
                for key, status, error in pool.imap_unordered(_execute_item, pending):
                    note(by_key[key], status, error)
                    flush()
        else:
            for item in pending:
                key, status, error = _execute_item(item)
                note(by_key[key], status, error)
                flush()
    finally:
        _WORKER_STATE.clear()
        flush()
    return manifest


def _load_manifest(run_dir: str | Path) -> dict:
    manifest_path = Path(run_dir) / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {run_dir}")
    with open(manifest_path, encoding="utf-8") as fh:
        return json.load(fh)


def _spec_label(info: Mapping) -> str:
    workflow = info["workflow"]
    return workflow if not info.get("strategy") else f"{workflow}/{info['strategy']}"


def aggregate(
    run_dir: str | Path, baseline_mode: str = "bm25", by_group: bool = False
) -> dict:
    """Compute per-run optimal costs and relative-cost tables from a run directory.

    Returns a report dict and writes ``run_costs.csv``, ``relative_costs.csv``
    and (with ``by_group``) ``group_relative_costs.csv`` next to the records.
    """
    run_dir = Path(run_dir)
    manifest = _load_manifest(run_dir)
    records_dir = run_dir / "records"
    groups_map: dict[str, list] = manifest.get("category_groups", {})

    failed = [k for k, info in manifest["runs"].items() if info["status"] != "done"]
    if failed:
        raise ValueError(f"{len(failed)} run(s) not complete, e.g. {sorted(failed)[:3]}")

    # (spec label, cost tuple) -> mode -> {(category, seed_set): optimal cost}
    costs: dict[tuple[str, tuple], dict[str, dict[tuple[str, int], float]]] = {}
    run_rows: list[tuple[str, int, str, str, float, int]] = []
    for key in sorted(manifest["runs"]):
        info = manifest["runs"][key]
        record = load_run_record(records_dir / info["file"])
        cs = CostStructure(*info["cost"])
        total, argmin = optimal_cost(record, cs)
        spec_key = (_spec_label(info), tuple(info["cost"]))
        costs.setdefault(spec_key, {}).setdefault(info["feature_mode"], {})[
            (info["category"], info["seed_set"])
        ] = total
        run_rows.append(
            (info["category"], info["seed_set"], info["feature_mode"], _spec_label(info), total, argmin)
        )
    run_rows.sort(key=lambda r: (r[3], r[2], r[0], r[1]))
    write_run_costs_csv(run_rows, run_dir / "run_costs.csv")

    relative: dict[str, dict[str, float]] = {}
    for (spec_label, _cost_tuple), by_mode in sorted(costs.items()):
        if baseline_mode not in by_mode:
            raise ValueError(f"missing baseline runs for mode {baseline_mode!r} under {spec_label}")
        baseline = by_mode[baseline_mode]
        relative[spec_label] = {
            mode: relative_cost(by_mode[mode], baseline) for mode in sorted(by_mode)
        }

    with open(run_dir / "relative_costs.csv", "w", encoding="utf-8") as fh:
        fh.write("workflow,feature_mode,relative_cost\n")
        for spec_label in sorted(relative):
            for mode in sorted(relative[spec_label]):
                fh.write(f"{spec_label},{mode},{relative[spec_label][mode]:.4f}\n")

    report = {"relative": relative}

    if by_group:
        group_rows = []
        group_table: dict[tuple[str, str, str, str], float] = {}
        for (spec_label, _cost_tuple), by_mode in sorted(costs.items()):
            baseline = by_mode[baseline_mode]
            cells: dict[tuple[str, str], list[str]] = {}
            for category in sorted({cat for cat, _ in baseline}):
                difficulty, prevalence = groups_map.get(category, [None, None])
                if difficulty is None or prevalence is None:
                    continue
                cells.setdefault((difficulty, prevalence), []).append(category)
            for (difficulty, prevalence), cats in sorted(cells.items()):
                for mode in sorted(by_mode):
                    sub_run = {k: v for k, v in by_mode[mode].items() if k[0] in cats}
                    sub_base = {k: v for k, v in baseline.items() if k[0] in cats}
                    value = relative_cost(sub_run, sub_base)
                    group_table[(spec_label, difficulty, prevalence, mode)] = value
                    group_rows.append((spec_label, difficulty, prevalence, mode, value))
        with open(run_dir / "group_relative_costs.csv", "w", encoding="utf-8") as fh:
            fh.write("workflow,difficulty,prevalence,feature_mode,relative_cost\n")
            for spec_label, difficulty, prevalence, mode, value in group_rows:
                fh.write(f"{spec_label},{difficulty},{prevalence},{mode},{value:.4f}\n")
        report["groups"] = group_table

    return report


def format_relative_table(report: dict) -> str:
    """Human-readable relative-cost table, one block per workflow spec."""
    lines = []
    for spec_label in sorted(report["relative"]):
        lines.append(f"[{spec_label}]")
        table = report["relative"][spec_label]
        width = max(len(m) for m in table)
        for mode in sorted(table):
            lines.append(f"  {mode.ljust(width)}  {table[mode]:.4f}")
    return "\n".join(lines)


def emit_dynamics(
    run_dir: str | Path,
    category: str,
    seed_set: int,
    feature_mode: str,
    out_prefix: str | Path | None = None,
) -> tuple[Path, Path]:
    """Write the per-iteration cost-sector CSV and a stacked-area SVG chart.

    The selected run must be two-phase: the chart decomposes total cost into
    the four sectors and marks iterations where the ranking already reaches
    the recall target (zero second-phase depth) with dashed vertical lines.
    """
    run_dir = Path(run_dir)
    manifest = _load_manifest(run_dir)
    matches = [
        (key, info)
        for key, info in sorted(manifest["runs"].items())
        if info["category"] == category
        and info["seed_set"] == seed_set
        and info["feature_mode"] == feature_mode
    ]
    if not matches:
        raise ValueError(f"no run matches category={category!r} seed_set={seed_set} mode={feature_mode!r}")
    two_phase = [(k, i) for k, i in matches if i["workflow"] == "two_phase"]
    if not two_phase:
        raise ValueError("selected run(s) are one_phase; cost dynamics need a two_phase run")
    key, info = two_phase[0]
    record = load_run_record(run_dir / "records" / info["file"])
    cs = CostStructure(*info["cost"])
    table = cost_dynamics_table(record, cs)

    if out_prefix is None:
        out_prefix = run_dir / f"dynamics_{_safe_name(key)}"
    out_prefix = Path(out_prefix)
    csv_path = out_prefix.with_suffix(".csv")
    svg_path = out_prefix.with_suffix(".svg")
    write_dynamics_csv(table, csv_path)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    iterations = [e.iteration for e in table]
    sectors = [
        [e.phase1_pos_cost for e in table],
        [e.phase1_neg_cost for e in table],
        [e.phase2_pos_cost for e in table],
        [e.phase2_neg_cost for e in table],
    ]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.stackplot(
        iterations,
        *sectors,
        labels=["phase-1 relevant", "phase-1 non-relevant", "phase-2 relevant", "phase-2 non-relevant"],
        colors=["#1b6ca8", "#8ecae6", "#d1495b", "#f4a259"],
    )
    for e in table:
        if e.depth_zero:
            ax.axvline(e.iteration, color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel("iteration")
    ax.set_ylabel("total review cost")
    ax.set_title(f"{category} ({feature_mode}, two_phase)")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(svg_path)
    plt.close(fig)
    return csv_path, svg_path
