"""
Batch Engine
Purpose: Level-wise search of a sorted key batch over the flat tree

The root is fetched once for the whole batch. Every node fetched at a level
routes its share of keys, consumed in sorted order through one running key
index, and enqueues one (child address, key count) entry per distinct child.
At the leaf level the same pass produces payloads or the not-found sentinel.
"""

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import (
    BatchTooLargeError, CorruptTreeError, EmptyBatchError, InvalidPartitionError,
    RoutingInvariantError, UnsortedBatchError,
)
from app.engines.comparator import select_slots
from app.engines.flat_tree import FlatTree
from app.engines.tree_model import CHUNK_SIZE, KEY_SIZE, NOT_FOUND, first_unsorted_row, key_block
from app.models import SearchStats

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FifoEntry:
    child_address: int
    key_count: int


@dataclass(frozen=True)
class SortedBatch:
    """Non-decreasing search keys held as an (n, 32) block; duplicates allowed"""

    keys: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.keys.ndim != 2 or self.keys.shape[1] != KEY_SIZE:
            raise ValueError(f"batch must have shape (n, {KEY_SIZE})")

    @classmethod
    def from_block(cls, block: np.ndarray, max_batch: Optional[int] = None) -> "SortedBatch":
        limit = max_batch or settings.max_batch
        if len(block) == 0:
            raise EmptyBatchError("a search batch needs at least one key")
        if len(block) > limit:
            raise BatchTooLargeError(f"batch of {len(block)} keys exceeds the {limit}-key buffer")
        bad = first_unsorted_row(block, strict=False)
        if bad >= 0:
            raise UnsortedBatchError(f"batch key {bad} sorts before key {bad - 1}")
        return cls(np.ascontiguousarray(block, dtype=np.uint8))

    @classmethod
    def from_keys(cls, keys: Sequence[bytes], max_batch: Optional[int] = None) -> "SortedBatch":
        if len(keys) == 0:
            raise EmptyBatchError("a search batch needs at least one key")
        return cls.from_block(key_block(keys), max_batch)

    def __len__(self) -> int:
        return len(self.keys)

    def slice(self, start: int, stop: int) -> "SortedBatch":
        return SortedBatch(self.keys[start:stop])


@dataclass
class BatchOutcome:
    results: np.ndarray                  # uint64, aligned with the batch
    stats: SearchStats
    trace: Optional[List[List[FifoEntry]]] = None

    def __iter__(self):
        yield self.results
        yield self.stats


@dataclass
class PartitionedOutcome:
    results: np.ndarray
    per_instance_stats: List[SearchStats]
    aggregate: SearchStats
    sizes: List[int]

    def __iter__(self):
        yield self.results
        yield self.per_instance_stats


class BatchSearchEngine:
    """Single-instance level-wise searcher; holds no state between calls"""

    def search(self, tree: FlatTree, batch: SortedBatch, record_trace: bool = False) -> BatchOutcome:
        n = len(batch)
        if n == 0:
            raise EmptyBatchError("a search batch needs at least one key")

        meta = tree.meta
        k_max = meta.k_max
        stats = SearchStats.empty(meta.height_h)
        stats.batch_size = n
        stats.key_buffer_loads = n
        results = np.full(n, NOT_FOUND, dtype=np.uint64)
        trace: Optional[List[List[FifoEntry]]] = [] if record_trace else None

        fifo = deque([FifoEntry(meta.root_offset, n)])
        level_entries = 1
        high_water = 1

        for depth in range(meta.height_h - 1, -1, -1):
            if trace is not None:
                trace.append(list(fifo))
            key_index = 0
            emitted = 0
            for _ in range(level_entries):
                entry = fifo.popleft()
                try:
                    node = tree.node(entry.child_address)
                except CorruptTreeError as e:
                    logger.error(f"batch search aborted at level {depth}: {e}")
                    raise
                stats.node_loads_per_level[depth] += 1

                if node.depth != depth:
                    raise CorruptTreeError(
                        f"node at {node.offset} reports depth {node.depth}, expected {depth}",
                        offset=node.offset,
                    )
                if not 1 <= node.slot_use <= k_max:
                    raise CorruptTreeError(
                        f"node at {node.offset} has slotUse {node.slot_use}", offset=node.offset
                    )

                block = batch.keys[key_index:key_index + entry.key_count]
                slots, exact = select_slots(block, node.keys, node.slot_use)
                stats.slot_comparisons += entry.key_count * k_max

                if depth == 0:
                    payloads = node.data[np.minimum(slots, k_max - 1)]
                    results[key_index:key_index + entry.key_count] = np.where(
                        exact, payloads, np.uint64(NOT_FOUND)
                    )
                else:
                    for child, count in self._group_routes(slots, node.offset):
                        fifo.append(FifoEntry(int(node.children[child]), count))
                        emitted += 1
                    high_water = max(high_water, len(fifo))
                key_index += entry.key_count

            if key_index != n:
                raise RoutingInvariantError(
                    f"level {depth} consumed {key_index} of {n} keys"
                )
            level_entries = emitted

        if high_water > n:
            raise RoutingInvariantError(f"FIFO held {high_water} entries for {n} keys")

        stats.total_node_loads = sum(stats.node_loads_per_level)
        stats.bytes_fetched = stats.total_node_loads * meta.node_size
        stats.chunks_fetched = stats.bytes_fetched // CHUNK_SIZE
        stats.fifo_high_water = high_water
        return BatchOutcome(results=results, stats=stats, trace=trace)

    @staticmethod
    def _group_routes(slots: np.ndarray, offset: int):
        """Runs of equal child slots -> (slot, count), in first-touch order"""
        if len(slots) > 1 and np.any(np.diff(slots) < 0):
            raise RoutingInvariantError(
                f"keys routed through node {offset} are not contiguous per child", offset=offset
            )
        children, counts = np.unique(slots, return_counts=True)
        return zip(children.tolist(), counts.tolist())


batch_engine = BatchSearchEngine()


def batch_search(tree: FlatTree, batch: SortedBatch, record_trace: bool = False) -> BatchOutcome:
    return batch_engine.search(tree, batch, record_trace=record_trace)


def partition_sizes(total: int, instances_p: int) -> List[int]:
    """Contiguous split whose sizes differ by at most one, larger parts first"""
    if instances_p < 1 or instances_p > total:
        raise InvalidPartitionError(
            f"cannot split {total} keys across {instances_p} instances"
        )
    base, extra = divmod(total, instances_p)
    return [base + 1 if i < extra else base for i in range(instances_p)]


def partitioned_search(tree: FlatTree, batch: SortedBatch, instances_p: int,
                       workers: Optional[int] = None) -> PartitionedOutcome:
    """Run independent engine instances over contiguous sub-batches"""
    sizes = partition_sizes(len(batch), instances_p)
    bounds = np.cumsum([0] + sizes)
    parts = [batch.slice(int(bounds[i]), int(bounds[i + 1])) for i in range(instances_p)]

    pool_size = min(workers or settings.partition_workers, instances_p)
    if pool_size <= 1:
        outcomes = [BatchSearchEngine().search(tree, part) for part in parts]
    else:
        with ThreadPoolExecutor(max_workers=pool_size) as pool:
            outcomes = list(pool.map(lambda part: BatchSearchEngine().search(tree, part), parts))

    per_instance = [o.stats for o in outcomes]
    return PartitionedOutcome(
        results=np.concatenate([o.results for o in outcomes]),
        per_instance_stats=per_instance,
        aggregate=SearchStats.aggregate(per_instance),
        sizes=sizes,
    )


def sort_and_restore(raw_keys: Sequence[bytes], max_batch: Optional[int] = None) -> Tuple[SortedBatch, np.ndarray]:
    """
    Stable-sort raw keys into a batch.

    Returns the batch and `permutation`, where sorted position i holds input
    key permutation[i].
    """
    limit = max_batch or settings.max_batch
    if len(raw_keys) == 0:
        raise EmptyBatchError("a search batch needs at least one key")
    if len(raw_keys) > limit:
        raise BatchTooLargeError(f"batch of {len(raw_keys)} keys exceeds the {limit}-key buffer")
    raw = [bytes(k) for k in raw_keys]
    permutation = np.array(sorted(range(len(raw)), key=raw.__getitem__), dtype=np.int64)
    block = key_block(raw[i] for i in permutation)
    return SortedBatch.from_block(block, limit), permutation


def restore_order(permutation: np.ndarray, sorted_results: np.ndarray) -> np.ndarray:
    """Undo sort_and_restore: results come back in input order"""
    restored = np.empty_like(sorted_results)
    restored[permutation] = sorted_results
    return restored
