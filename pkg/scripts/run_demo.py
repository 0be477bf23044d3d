#!/usr/bin/env python3
"""End-to-end demo on synthetic data.

Generates a corpus, runs the full grid (three feature modes, both
workflows), prints the relative-cost tables and renders one cost-dynamics
chart. Everything lands under the chosen working directory.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

from tarsim import runner


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="demo", help="where data and runs are written")
    parser.add_argument("--docs", type=int, default=1500)
    parser.add_argument("--seed-sets", type=int, default=5)
    parser.add_argument("--workers", type=int, default=2)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    data_dir = workdir / "data"
    subprocess.run(
        [sys.executable, str(Path(__file__).parent / "make_synthetic_corpus.py"),
         "--out", str(data_dir), "--docs", str(args.docs)],
        check=True,
    )

    config_path = workdir / "experiment.json"
    config_path.write_text(
        json.dumps(
            {
                "version": 1,
                "corpus": str(data_dir / "corpus.jsonl"),
                "labels": str(data_dir / "labels.qrels"),
                "vectors": str(data_dir / "vectors.jsonl"),
                "groups": str(data_dir / "groups.csv"),
                "output_dir": str(workdir / "runs"),
                "feature_modes": ["bm25", "splade", "fused"],
                "workflows": [
                    {"workflow": "one_phase", "cost": "uniform"},
                    {"workflow": "two_phase", "cost": "expensive_training"},
                ],
                "seed_sets": args.seed_sets,
                "batch_size": 50,
                "recall_target": 0.8,
                "rng_seed": 0,
                "parallelism": args.workers,
            },
            indent=2,
        )
    )

    config = runner.load_experiment_config(config_path)
    manifest = runner.run_experiment(config)
    done = sum(1 for info in manifest["runs"].values() if info["status"] == "done")
    print(f"\n{done}/{len(manifest['runs'])} runs done")

    report = runner.aggregate(workdir / "runs", baseline_mode="bm25", by_group=True)
    print("\nrelative optimal cost vs bm25 baseline:")
    print(runner.format_relative_table(report))

    category = sorted(manifest["category_groups"] or {"cat00": None})[0]
    csv_path, svg_path = runner.emit_dynamics(workdir / "runs", category, 0, "fused")
    print(f"\ncost dynamics for {category}: {csv_path}, {svg_path}")


if __name__ == "__main__":
    main()
