"""Review-cost metrics computed post hoc from run records.

Every metric is a pure function of a record and a cost structure: the
per-iteration four-sector split (phase-1 positives/negatives, phase-2
positives/negatives), the optimal total cost over iterations, and the
relative cost of a method against a baseline, macro-averaged over
categories.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .workflow import RunRecord


@dataclass(frozen=True)
class CostStructure:
    """Unit review costs per document kind."""

    phase1_pos: float
    phase1_neg: float
    phase2_pos: float
    phase2_neg: float

    def __post_init__(self):
        if min(self.phase1_pos, self.phase1_neg, self.phase2_pos, self.phase2_neg) < 0:
            raise ValueError("unit costs must be nonnegative")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.phase1_pos, self.phase1_neg, self.phase2_pos, self.phase2_neg)


UNIFORM_COST = CostStructure(1, 1, 1, 1)
# Training (phase-1) documents cost ten times a second-phase review.
EXPENSIVE_TRAINING = CostStructure(10, 10, 1, 1)

COST_PRESETS: Mapping[str, CostStructure] = {
    "uniform": UNIFORM_COST,
    "expensive_training": EXPENSIVE_TRAINING,
}


@dataclass(frozen=True)
class CostEntry:
    """Cost sectors (already multiplied by unit costs) for one iteration."""

    iteration: int
    phase1_pos_cost: float
    phase1_neg_cost: float
    phase2_pos_cost: float
    phase2_neg_cost: float
    total: float
    depth_zero: bool


def iteration_cost(record: RunRecord, iteration: int, cs: CostStructure) -> CostEntry:
    """Four-sector cost of stopping the run at the given iteration."""
    if not 0 <= iteration < len(record.iterations):
        raise ValueError(f"iteration {iteration} out of range [0, {len(record.iterations)})")
    entry = record.iterations[iteration]
    p1_pos = entry.cum_positives
    p1_neg = entry.cum_reviewed - entry.cum_positives
    if entry.phase2_depth is None:
        p2_pos = p2_neg = 0
        depth_zero = False
    else:
        p2_pos = entry.phase2_positives or 0
        p2_neg = entry.phase2_depth - p2_pos
        depth_zero = entry.phase2_depth == 0
    sectors = (
        p1_pos * cs.phase1_pos,
        p1_neg * cs.phase1_neg,
        p2_pos * cs.phase2_pos,
        p2_neg * cs.phase2_neg,
    )
    return CostEntry(
        iteration=iteration,
        phase1_pos_cost=sectors[0],
        phase1_neg_cost=sectors[1],
        phase2_pos_cost=sectors[2],
        phase2_neg_cost=sectors[3],
        total=sum(sectors),
        depth_zero=depth_zero,
    )


def optimal_cost(record: RunRecord, cs: CostStructure) -> tuple[float, int]:
    """(lowest total cost over iterations, iteration achieving it).

    A one-phase run has exactly one candidate, its stopping iteration: review
    effort only accumulates, there is no ranked second phase to fall back on.
    Ties in a two-phase run resolve to the earliest iteration.
    """
    if record.config.workflow == "one_phase":
        last = len(record.iterations) - 1
        return iteration_cost(record, last, cs).total, last
    best_total: float | None = None
    best_iter = 0
    for i in range(len(record.iterations)):
        total = iteration_cost(record, i, cs).total
        if best_total is None or total < best_total:
            best_total = total
            best_iter = i
    return best_total, best_iter


def cost_dynamics_table(record: RunRecord, cs: CostStructure) -> list[CostEntry]:
    """Per-iteration sector costs for the whole run."""
    return [iteration_cost(record, i, cs) for i in range(len(record.iterations))]


RunKey = tuple[str, int]  # (category_id, seed_set_id)


def relative_cost(
    run_costs: Mapping[RunKey, float], baseline_costs: Mapping[RunKey, float]
) -> float:
    """Macro-averaged cost ratio against a baseline.

    Runs pair by (category, seed set). Per category the ratio is
    mean(method costs) / mean(baseline costs); categories then average with
    equal weight. A method against itself is exactly 1.0.
    """
    if set(run_costs) != set(baseline_costs):
        missing = set(run_costs) ^ set(baseline_costs)
        raise ValueError(f"unpaired runs: {sorted(missing)[:5]}")
    if not run_costs:
        raise ValueError("no runs to compare")
    by_category: dict[str, list[RunKey]] = {}
    for key in run_costs:
        by_category.setdefault(key[0], []).append(key)
    ratios = []
    for category in sorted(by_category):
        keys = by_category[category]
        mean_run = sum(run_costs[k] for k in keys) / len(keys)
        mean_base = sum(baseline_costs[k] for k in keys) / len(keys)
        if mean_base <= 0:
            raise ValueError(f"baseline cost must be positive (category {category})")
        ratios.append(mean_run / mean_base)
    return sum(ratios) / len(ratios)


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def write_run_costs_csv(
    rows: Iterable[tuple[str, int, str, str, float, int]], path: str | Path
) -> None:
    """Per-run summary: category,seed_set,feature_mode,workflow,optimal_cost,argmin_iteration."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "seed_set", "feature_mode", "workflow", "optimal_cost", "argmin_iteration"])
        for category, seed_set, mode, workflow, cost, argmin in rows:
            writer.writerow([category, seed_set, mode, workflow, _fmt(cost), argmin])


def write_dynamics_csv(table: Sequence[CostEntry], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "p1_pos", "p1_neg", "p2_pos", "p2_neg", "total", "depth_zero_flag"])
        for e in table:
            writer.writerow(
                [
                    e.iteration,
                    _fmt(e.phase1_pos_cost),
                    _fmt(e.phase1_neg_cost),
                    _fmt(e.phase2_pos_cost),
                    _fmt(e.phase2_neg_cost),
                    _fmt(e.total),
                    int(e.depth_zero),
                ]
            )
