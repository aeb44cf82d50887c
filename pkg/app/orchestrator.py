"""
Orchestrator: Coordinates the engines behind every command

build      generate entries -> bulk load -> serialize
gen-batch  read tree -> draw hits and misses -> write raw keys
search     read tree + keys -> sort -> batched or partitioned search -> restore order
verify     batched search vs per-key baseline, key by key
bench      repeated runs per configuration -> robust summaries
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.config import settings
from app.errors import BatchTooLargeError, EmptyBatchError
from app.engines.baseline import sequential_batch
from app.engines.batch_engine import (
    batch_search, partitioned_search, restore_order, sort_and_restore,
)
from app.engines.bench_stats import BenchmarkRunner, benchmark_runner
from app.engines.builder import EntrySet, bulk_load
from app.engines.datagen import generate_batch, generate_entries
from app.engines.flat_tree import FlatTree
from app.engines.tree_model import keys_from_block
from app.models import (
    BenchConfig, BenchReport, BenchRow, GenSpec, SearchMode, SearchStats, TreeSummary, VerifyReport,
)
from app.storage import ArtifactStore, storage

logger = logging.getLogger(__name__)

MISMATCH_PREVIEW = 5


@dataclass
class SearchRun:
    results: np.ndarray          # input key order
    stats: SearchStats           # aggregate over instances
    per_instance: List[SearchStats]


def summarize_tree(tree: FlatTree, file_size: Optional[int] = None) -> TreeSummary:
    return TreeSummary(meta=tree.meta, file_size=file_size, nodes_per_level=tree.nodes_per_level())


# ============================================================
# build
# ============================================================

def build_tree(spec: GenSpec) -> FlatTree:
    entries = generate_entries(spec)
    tree = bulk_load(entries, spec.order_m)
    logger.info(
        f"✓ Tree built: {tree.meta.entry_count} entries, order {tree.meta.order_m}, "
        f"height {tree.meta.height_h}, {tree.meta.node_count} nodes"
    )
    return tree


def build_tree_file(spec: GenSpec, out: str, store: ArtifactStore = storage) -> TreeSummary:
    tree = build_tree(spec)
    path = store.write_tree(tree, out)
    summary = summarize_tree(tree, store.file_size(path))
    logger.info(f"✓ Wrote {summary.file_size} bytes to {path}")
    return summary


# ============================================================
# gen-batch
# ============================================================

def generate_batch_file(tree_path: str, size: int, spec: GenSpec, out: str,
                        max_batch: Optional[int] = None, store: ArtifactStore = storage) -> np.ndarray:
    limit = max_batch or settings.max_batch
    if size < 1:
        raise EmptyBatchError("a batch needs at least one key")
    if size > limit:
        raise BatchTooLargeError(f"batch of {size} keys exceeds the {limit}-key buffer")
    tree = store.read_tree(tree_path)
    block = generate_batch(tree.entries(), size, spec)
    path = store.write_keys(block, out)
    logger.info(f"✓ Batch of {len(block)} keys (hit ratio {spec.hit_ratio}) written to {path}")
    return block


# ============================================================
# search
# ============================================================

def search_keys(tree: FlatTree, raw_keys: Sequence[bytes], instances_p: int = 1,
                max_batch: Optional[int] = None) -> SearchRun:
    batch, permutation = sort_and_restore(raw_keys, max_batch)
    if instances_p == 1:
        outcome = batch_search(tree, batch)
        sorted_results, stats, parts = outcome.results, outcome.stats, [outcome.stats]
    else:
        outcome = partitioned_search(tree, batch, instances_p)
        sorted_results, stats, parts = outcome.results, outcome.aggregate, outcome.per_instance_stats
    return SearchRun(
        results=restore_order(permutation, sorted_results),
        stats=stats,
        per_instance=parts,
    )


def run_search(tree_path: str, keys_path: str, instances_p: int = 1,
               results_out: Optional[str] = None, stats_out: Optional[str] = None,
               max_batch: Optional[int] = None, store: ArtifactStore = storage) -> SearchRun:
    tree = store.read_tree(tree_path)
    raw = keys_from_block(store.read_keys(keys_path))
    run = search_keys(tree, raw, instances_p, max_batch)
    logger.info(
        f"✓ Searched {len(raw)} keys with {instances_p} instance(s): "
        f"{run.stats.total_node_loads} node loads"
    )
    if results_out:
        store.write_results(run.results, results_out)
    if stats_out:
        document = run.stats.model_dump()
        if instances_p > 1:
            document["per_instance"] = [s.model_dump() for s in run.per_instance]
        store.write_json(document, stats_out)
    return run


# ============================================================
# verify
# ============================================================

def verify_keys(tree: FlatTree, raw_keys: Sequence[bytes], max_batch: Optional[int] = None) -> VerifyReport:
    run = search_keys(tree, raw_keys, 1, max_batch)
    expected, baseline_loads = sequential_batch(tree, list(raw_keys))
    mismatched = np.flatnonzero(run.results != expected)
    batched_loads = run.stats.total_node_loads
    report = VerifyReport(
        batch_size=len(raw_keys),
        mismatches=len(mismatched),
        first_mismatches=mismatched[:MISMATCH_PREVIEW].tolist(),
        batched_loads=batched_loads,
        baseline_loads=baseline_loads,
        load_ratio=baseline_loads / batched_loads,
        passed=len(mismatched) == 0,
    )
    if report.passed:
        logger.info(f"✓ Verified {report.batch_size} keys, load ratio {report.load_ratio:.2f}")
    else:
        logger.error(f"❌ {report.mismatches} mismatches, first at {report.first_mismatches}")
    return report


def run_verify(tree_path: str, keys_path: str, max_batch: Optional[int] = None,
               store: ArtifactStore = storage) -> VerifyReport:
    tree = store.read_tree(tree_path)
    raw = keys_from_block(store.read_keys(keys_path))
    return verify_keys(tree, raw, max_batch)


# ============================================================
# bench
# ============================================================

def bench_configuration(tree: FlatTree, entries: EntrySet, config: BenchConfig, spec: GenSpec,
                        runner: BenchmarkRunner = benchmark_runner):
    """One report for one tree, one batch size and one mode"""
    block = generate_batch(entries, config.batch_size, spec)
    batch, _ = sort_and_restore(keys_from_block(block), max(config.batch_size, settings.max_batch))
    return runner.run(config, tree, batch)


def bench_row(report: BenchReport) -> BenchRow:
    loads = report.metrics["total_node_loads"]
    wall = report.metrics["wall_time_s"]
    return BenchRow(
        mode=report.config.mode,
        entry_count=report.entry_count,
        order_m=report.order_m,
        height_h=report.height_h,
        batch_size=report.config.batch_size,
        instances_p=report.config.instances_p,
        repeats=report.config.repeats,
        total_loads_iqm=loads.iqm,
        total_loads_iqr=loads.iqr,
        loads_per_key=loads.iqm / report.config.batch_size,
        wall_time_iqm_s=wall.iqm,
        wall_time_iqr_s=wall.iqr,
    )


def run_bench(tree_sizes: Sequence[int], batch_sizes: Sequence[int], modes: Sequence[SearchMode],
              order_m: int, repeats: int, instances_p: int = 1, seed: int = 7,
              hit_ratio: float = 0.5, wide_keys: bool = False,
              runner: BenchmarkRunner = benchmark_runner) -> Dict[str, list]:
    """Sweep tree sizes x batch sizes x modes; one summary row per configuration"""
    rows: List[BenchRow] = []
    reports: List[BenchReport] = []
    repetitions: List[dict] = []

    for entry_count in tree_sizes:
        spec = GenSpec(entry_count=entry_count, order_m=order_m, seed=seed,
                       hit_ratio=hit_ratio, wide_keys=wide_keys)
        entries = generate_entries(spec)
        tree = bulk_load(entries, order_m)
        logger.info(f"🔍 Bench tree: {entry_count} entries, height {tree.meta.height_h}")

        for batch_size in batch_sizes:
            for mode in modes:
                config = BenchConfig(
                    mode=mode, repeats=repeats, batch_size=batch_size,
                    instances_p=min(instances_p, batch_size)
                    if mode in (SearchMode.PARTITIONED, SearchMode.THREADED) else 1,
                )
                report, runs = bench_configuration(tree, entries, config, spec, runner)
                row = bench_row(report)
                rows.append(row)
                reports.append(report)
                for i, sample in enumerate(runs):
                    repetitions.append({
                        "mode": mode.value,
                        "entry_count": entry_count,
                        "order_m": order_m,
                        "batch_size": batch_size,
                        "instances_p": config.instances_p,
                        "repetition": i,
                        "wall_time_s": sample.wall_time_s,
                        "total_node_loads": sample.total_node_loads,
                        "bytes_fetched": sample.bytes_fetched,
                        "slot_comparisons": sample.slot_comparisons,
                        "fifo_high_water": sample.fifo_high_water,
                    })
                logger.info(
                    f"✓ {mode.value:<11} batch {batch_size:>4}: "
                    f"{row.total_loads_iqm:.0f} loads, {row.loads_per_key:.3f} loads/key"
                )

    return {"rows": rows, "reports": reports, "repetitions": repetitions}
