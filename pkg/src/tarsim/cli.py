"""Command-line entry points.

Subcommands: ``dedupe`` (MD5 content dedup of a corpus), ``encode-bm25``
(emit the binary matrix cache), ``validate-vectors`` (check a sparse-vector
interchange file), ``run`` (execute an experiment grid), ``aggregate``
(relative-cost reports), and ``dynamics`` (per-iteration cost chart).
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import runner
from .corpus import dedupe_corpus, load_corpus
from .features import (
    DEFAULT_B,
    DEFAULT_K1,
    DEFAULT_VOCAB_SIZE,
    encode_bm25,
    matrix_stats,
    save_matrix_cache,
    validate_vectors_file,
)


def _cmd_dedupe(args) -> int:
    kept, dropped = dedupe_corpus(args.input, args.output)
    print(f"kept {kept} documents, dropped {dropped} duplicates")
    return 0


def _cmd_encode_bm25(args) -> int:
    collection = load_corpus(args.corpus)
    matrix = encode_bm25(collection, k1=args.k1, b=args.b)
    save_matrix_cache(matrix, args.output)
    avg_nnz, density = matrix_stats(matrix)
    print(
        f"encoded {matrix.n_rows} documents x {matrix.n_cols} terms "
        f"(avg nnz/row {avg_nnz:.2f}, density {density:.6f}) -> {args.output}"
    )
    return 0


def _cmd_validate_vectors(args) -> int:
    collection = load_corpus(args.corpus) if args.corpus else None
    errors = validate_vectors_file(
        args.vectors, collection, vocab_size=args.vocab_size, nnz_cap=args.top_s
    )
    for err in errors:
        print(f"ERROR: {err}", file=sys.stderr)
    print(f"{len(errors)} error(s)")
    return 1 if errors else 0


def _cmd_run(args) -> int:
    config = runner.load_experiment_config(args.config, output_dir=args.out)
    manifest = runner.run_experiment(config)
    statuses = [info["status"] for info in manifest["runs"].values()]
    done = statuses.count("done")
    failed = len(statuses) - done
    print(f"{done} run(s) done, {failed} failed -> {config.output_dir}")
    if failed:
        for key, info in sorted(manifest["runs"].items()):
            if info["status"] != "done":
                print(f"FAILED {key}: {info['error']}", file=sys.stderr)
    return 1 if failed else 0


def _cmd_aggregate(args) -> int:
    report = runner.aggregate(args.run_dir, baseline_mode=args.baseline, by_group=args.by_group)
    print(runner.format_relative_table(report))
    return 0


def _cmd_dynamics(args) -> int:
    csv_path, svg_path = runner.emit_dynamics(
        args.run_dir, args.category, args.seed_set, args.mode, out_prefix=args.out
    )
    print(f"wrote {csv_path} and {svg_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tarsim", description="Simulated high-recall review runs and cost analytics"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dedupe", help="drop documents with duplicate text (MD5)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=_cmd_dedupe)

    p = sub.add_parser("encode-bm25", help="encode a corpus and write the matrix cache")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--k1", type=float, default=DEFAULT_K1)
    p.add_argument("--b", type=float, default=DEFAULT_B)
    p.set_defaults(func=_cmd_encode_bm25)

    p = sub.add_parser("validate-vectors", help="check a sparse-vector interchange file")
    p.add_argument("--vectors", required=True)
    p.add_argument("--corpus", default=None, help="also check that every corpus document is covered")
    p.add_argument("--vocab-size", type=int, default=DEFAULT_VOCAB_SIZE)
    p.add_argument("--top-s", type=int, default=None, help="nnz cap per row (default: 10%% of vocab)")
    p.set_defaults(func=_cmd_validate_vectors)

    p = sub.add_parser("run", help="execute an experiment grid from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override the config's output_dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("aggregate", help="relative-cost reports from a run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--baseline", default="bm25")
    p.add_argument("--by-group", action="store_true", help="Table of difficulty x prevalence cells")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("dynamics", help="per-iteration cost CSV + stacked-area SVG for one run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--category", required=True)
    p.add_argument("--seed-set", type=int, default=0)
    p.add_argument("--mode", default="bm25")
    p.add_argument("--out", default=None, help="output path prefix (no extension)")
    p.set_defaults(func=_cmd_dynamics)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
