"""
Benchmark Statistics
Purpose: Repetition harness with interquartile mean / interquartile range reporting

The interquartile mean drops floor(n/4) samples from each end of the sorted
samples and averages what remains (divided by the retained count).
Quartiles use the exclusive-median convention: the median of the lower and
upper halves, leaving out the middle sample when n is odd.
"""

import logging
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.errors import InsufficientSamplesError
from app.engines.baseline import sequential_batch, threaded_batch
from app.engines.batch_engine import batch_search, partitioned_search
from app.engines.tree_model import CHUNK_SIZE
from app.models import BenchConfig, BenchReport, RobustSummary, SearchMode

logger = logging.getLogger(__name__)

MIN_SAMPLES = 4


@dataclass(frozen=True)
class SampleSet:
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.values) < MIN_SAMPLES:
            raise InsufficientSamplesError(
                f"need at least {MIN_SAMPLES} samples for quartiles, got {len(self.values)}"
            )

    @classmethod
    def of(cls, values: Union["SampleSet", Sequence[float]]) -> "SampleSet":
        if isinstance(values, SampleSet):
            return values
        return cls(tuple(float(v) for v in values))

    def __len__(self) -> int:
        return len(self.values)

    def sorted(self) -> np.ndarray:
        return np.sort(np.asarray(self.values, dtype=np.float64))


def iqm(samples) -> float:
    data = SampleSet.of(samples).sorted()
    trim = len(data) // 4
    return float(np.mean(data[trim:len(data) - trim]))


def quartiles(samples) -> Tuple[float, float]:
    data = SampleSet.of(samples).sorted()
    n = len(data)
    half = n // 2
    lower = data[:half]
    upper = data[half + (n % 2):]
    return float(statistics.median(lower)), float(statistics.median(upper))


def iqr(samples) -> float:
    q1, q3 = quartiles(samples)
    return q3 - q1


def summarize(samples, unit: str = "") -> RobustSummary:
    sample_set = SampleSet.of(samples)
    q1, q3 = quartiles(sample_set)
    return RobustSummary(
        n=len(sample_set),
        iqm=iqm(sample_set),
        iqr=q3 - q1,
        q1=q1,
        q3=q3,
        unit=unit,
        samples=list(sample_set.values),
    )


# ---------------------------------------------------------------------------
# repetition harness
# ---------------------------------------------------------------------------

METRIC_UNITS = {
    "wall_time_s": "s",
    "total_node_loads": "nodes",
    "bytes_fetched": "bytes",
    "chunks_fetched": "chunks",
    "slot_comparisons": "comparisons",
    "loads_per_key": "nodes/key",
    "fifo_high_water": "entries",
}


@dataclass
class RunSample:
    wall_time_s: float
    total_node_loads: int
    bytes_fetched: int
    chunks_fetched: int
    slot_comparisons: int
    fifo_high_water: int
    batch_size: int

    @property
    def loads_per_key(self) -> float:
        return self.total_node_loads / self.batch_size

    def metric(self, name: str) -> float:
        return float(getattr(self, name))


class BenchmarkRunner:
    """Runs one engine `repeats` times on identical inputs, sequentially"""

    def __init__(self, clock: Callable[[], float] = time.perf_counter):
        self.clock = clock

    def run_once(self, config: BenchConfig, tree, batch) -> RunSample:
        meta = tree.meta
        started = self.clock()
        if config.mode == SearchMode.BATCHED:
            stats = batch_search(tree, batch).stats
        elif config.mode == SearchMode.PARTITIONED:
            stats = partitioned_search(tree, batch, config.instances_p).aggregate
        else:
            if config.mode == SearchMode.THREADED:
                _, loads = threaded_batch(tree, batch, config.instances_p)
            else:
                _, loads = sequential_batch(tree, batch)
            elapsed = self.clock() - started
            return RunSample(
                wall_time_s=elapsed,
                total_node_loads=loads,
                bytes_fetched=loads * meta.node_size,
                chunks_fetched=loads * meta.node_size // CHUNK_SIZE,
                slot_comparisons=loads * meta.k_max,
                fifo_high_water=0,
                batch_size=len(batch),
            )
        elapsed = self.clock() - started
        return RunSample(
            wall_time_s=elapsed,
            total_node_loads=stats.total_node_loads,
            bytes_fetched=stats.bytes_fetched,
            chunks_fetched=stats.chunks_fetched,
            slot_comparisons=stats.slot_comparisons,
            fifo_high_water=stats.fifo_high_water,
            batch_size=stats.batch_size,
        )

    def run(self, config: BenchConfig, tree, batch_source) -> Tuple[BenchReport, List[RunSample]]:
        """
        batch_source is a SortedBatch or a zero-argument callable returning one;
        it is resolved once so every repetition sees the same keys.
        """
        if config.repeats < MIN_SAMPLES:
            raise InsufficientSamplesError(f"repeats must be >= {MIN_SAMPLES}, got {config.repeats}")
        batch = batch_source() if callable(batch_source) else batch_source

        runs = [self.run_once(config, tree, batch) for _ in range(config.repeats)]
        metrics: Dict[str, RobustSummary] = {
            name: summarize([r.metric(name) for r in runs], unit)
            for name, unit in METRIC_UNITS.items()
        }
        for name in ("total_node_loads", "bytes_fetched", "slot_comparisons"):
            if metrics[name].iqr != 0:
                logger.warning(f"deterministic metric {name} varied across repeats (IQR {metrics[name].iqr})")

        report = BenchReport(
            config=config,
            height_h=tree.meta.height_h,
            entry_count=tree.meta.entry_count,
            order_m=tree.meta.order_m,
            metrics=metrics,
        )
        return report, runs


benchmark_runner = BenchmarkRunner()


def run_benchmark(config: BenchConfig, tree, batch_source,
                  runner: Optional[BenchmarkRunner] = None) -> BenchReport:
    report, _ = (runner or benchmark_runner).run(config, tree, batch_source)
    return report
