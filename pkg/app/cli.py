"""
Command-line surface: build, gen-batch, search, verify, bench.

Exit status: 0 on success, 1 when verification finds mismatches,
2 on invalid input (a JSON error object is printed to stderr).
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

import tabulate as T

from app import orchestrator
from app.config import settings, setup_logging
from app.engines.tree_model import NOT_FOUND
from app.errors import BatchSearchError
from app.models import GenSpec, SearchMode
from app.storage import storage

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INVALID = 2


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="batchsearch", description="Level-wise batched B+ tree search")
    parser.add_argument("--json", action="store_true", help="print the summary as JSON")
    parser.add_argument("--log-level", default=None, help="override the configured log level")
    commands = parser.add_subparsers(dest="command", required=True)

    build = commands.add_parser("build", help="generate entries and write a tree file")
    build.add_argument("--entries", type=int, required=True)
    build.add_argument("--order", type=int, default=settings.default_order)
    build.add_argument("--seed", type=int, default=settings.default_seed)
    build.add_argument("--wide-keys", action="store_true", default=settings.wide_keys)
    build.add_argument("--out", required=True)

    gen = commands.add_parser("gen-batch", help="draw a query batch against a tree")
    gen.add_argument("--tree", required=True)
    gen.add_argument("--size", type=int, required=True)
    gen.add_argument("--seed", type=int, default=settings.default_seed)
    gen.add_argument("--hit-ratio", type=float, default=0.5)
    gen.add_argument("--wide-keys", action="store_true", default=settings.wide_keys)
    gen.add_argument("--max-batch", type=int, default=settings.max_batch)
    gen.add_argument("--out", required=True)

    search = commands.add_parser("search", help="batched search of a key file")
    search.add_argument("--tree", required=True)
    search.add_argument("--batch", required=True)
    search.add_argument("--instances", type=int, default=1)
    search.add_argument("--max-batch", type=int, default=settings.max_batch)
    search.add_argument("--results-out")
    search.add_argument("--stats-out")

    verify = commands.add_parser("verify", help="compare batched search against per-key search")
    verify.add_argument("--tree", required=True)
    verify.add_argument("--batch", required=True)
    verify.add_argument("--max-batch", type=int, default=settings.max_batch)

    bench = commands.add_parser("bench", help="repeated runs with IQM/IQR summaries")
    bench.add_argument("--mode", action="append", choices=[m.value for m in SearchMode])
    bench.add_argument("--batch-sizes", type=_int_list, default=[settings.max_batch])
    bench.add_argument("--tree-sizes", type=_int_list, default=[1_000_000])
    bench.add_argument("--order", type=int, default=settings.default_order)
    bench.add_argument("--repeats", type=int, default=settings.bench_repeats)
    bench.add_argument("--instances", type=int, default=1)
    bench.add_argument("--hit-ratio", type=float, default=0.5)
    bench.add_argument("--seed", type=int, default=settings.default_seed)
    bench.add_argument("--wide-keys", action="store_true", default=settings.wide_keys)
    bench.add_argument("--out", help="JSON report")
    bench.add_argument("--csv", help="per-repetition rows")

    return parser


def _emit(args, document: dict, rows: List[dict]):
    if args.json:
        print(json.dumps(document, indent=2))
    elif rows:
        print(T.tabulate(rows, headers="keys", tablefmt="pretty"))


# ============================================================
# commands
# ============================================================

def cmd_build(args) -> int:
    spec = GenSpec(entry_count=args.entries, order_m=args.order, seed=args.seed, wide_keys=args.wide_keys)
    summary = orchestrator.build_tree_file(spec, args.out)
    meta = summary.meta
    _emit(args, summary.model_dump(), [{
        "entries": meta.entry_count,
        "order": meta.order_m,
        "height": meta.height_h,
        "nodes": meta.node_count,
        "node_size": meta.node_size,
        "file_size": summary.file_size,
    }])
    return EXIT_OK


def cmd_gen_batch(args) -> int:
    spec = GenSpec(seed=args.seed, hit_ratio=args.hit_ratio, wide_keys=args.wide_keys)
    block = orchestrator.generate_batch_file(args.tree, args.size, spec, args.out, args.max_batch)
    document = {"size": len(block), "hit_ratio": args.hit_ratio, "seed": args.seed, "out": args.out}
    _emit(args, document, [document])
    return EXIT_OK


def cmd_search(args) -> int:
    run = orchestrator.run_search(
        args.tree, args.batch, args.instances,
        results_out=args.results_out, stats_out=args.stats_out, max_batch=args.max_batch,
    )
    stats = run.stats
    found = int((run.results != NOT_FOUND).sum())
    _emit(args, stats.model_dump(), [{
        "keys": stats.batch_size,
        "found": found,
        "instances": args.instances,
        "node_loads": stats.total_node_loads,
        "per_level": stats.node_loads_per_level,
        "bytes": stats.bytes_fetched,
        "fifo_high_water": stats.fifo_high_water,
    }])
    return EXIT_OK


def cmd_verify(args) -> int:
    report = orchestrator.run_verify(args.tree, args.batch, args.max_batch)
    _emit(args, report.model_dump(), [{
        "keys": report.batch_size,
        "mismatches": report.mismatches,
        "first": report.first_mismatches,
        "batched_loads": report.batched_loads,
        "baseline_loads": report.baseline_loads,
        "load_ratio": round(report.load_ratio, 3),
        "passed": report.passed,
    }])
    return EXIT_OK if report.passed else EXIT_MISMATCH


def cmd_bench(args) -> int:
    modes = [SearchMode(m) for m in (args.mode or [SearchMode.BATCHED.value, SearchMode.BASELINE.value])]
    sweep = orchestrator.run_bench(
        tree_sizes=args.tree_sizes,
        batch_sizes=args.batch_sizes,
        modes=modes,
        order_m=args.order,
        repeats=args.repeats,
        instances_p=args.instances,
        seed=args.seed,
        hit_ratio=args.hit_ratio,
        wide_keys=args.wide_keys,
    )
    rows = [row.model_dump(mode="json") for row in sweep["rows"]]
    if args.out:
        storage.write_json({"rows": rows, "reports": sweep["reports"]}, args.out)
    if args.csv:
        storage.write_csv(sweep["repetitions"], args.csv)
    _emit(args, {"rows": rows}, rows)
    return EXIT_OK


COMMANDS = {
    "build": cmd_build,
    "gen-batch": cmd_gen_batch,
    "search": cmd_search,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except BatchSearchError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        print(json.dumps({"error": type(e).__name__, "message": str(e), "offset": None}), file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
