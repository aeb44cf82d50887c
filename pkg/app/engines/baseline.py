"""
Baseline Searcher
Purpose: Per-key root-to-leaf lookups, the reference answer and the unbatched cost

Each key walks from the root on its own and pays one node load per level.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import CorruptTreeError, EmptyBatchError, InvalidPartitionError
from app.engines.comparator import select_slots
from app.engines.flat_tree import FlatTree
from app.engines.tree_model import KEY_SIZE, NOT_FOUND, key_block

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PointResult:
    value: int
    loads: int

    @property
    def found(self) -> bool:
        return self.value != NOT_FOUND

    def __iter__(self):
        yield self.value
        yield self.loads


class BaselineSearcher:

    def point_search(self, tree: FlatTree, key) -> PointResult:
        query = _query(key)
        offset = tree.meta.root_offset
        loads = 0
        for depth in range(tree.meta.height_h - 1, -1, -1):
            node = tree.node(offset)
            loads += 1
            if node.depth != depth:
                raise CorruptTreeError(
                    f"node at {offset} reports depth {node.depth}, expected {depth}", offset=offset
                )
            if not 1 <= node.slot_use <= tree.meta.k_max:
                raise CorruptTreeError(f"node at {offset} has slotUse {node.slot_use}", offset=offset)
            slots, exact = select_slots(query, node.keys, node.slot_use)
            slot = int(slots[0])
            if node.is_leaf:
                value = int(node.data[slot]) if exact[0] else NOT_FOUND
                return PointResult(value=value, loads=loads)
            offset = int(node.children[slot])
        raise CorruptTreeError(f"no leaf reached below the root after {loads} loads")

    def sequential_batch(self, tree: FlatTree, batch) -> Tuple[np.ndarray, int]:
        keys = _rows(batch)
        if len(keys) == 0:
            raise EmptyBatchError("a search batch needs at least one key")
        results = np.empty(len(keys), dtype=np.uint64)
        total_loads = 0
        for i, key in enumerate(keys):
            hit = self.point_search(tree, key)
            results[i] = hit.value
            total_loads += hit.loads
        return results, total_loads

    def threaded_batch(self, tree: FlatTree, batch, threads: Optional[int] = None) -> Tuple[np.ndarray, int]:
        """Multi-threaded reference: contiguous chunks of keys, one chunk per worker"""
        keys = _rows(batch)
        if len(keys) == 0:
            raise EmptyBatchError("a search batch needs at least one key")
        threads = threads or settings.partition_workers
        if threads < 1:
            raise InvalidPartitionError(f"need at least one thread, got {threads}")
        chunks = [c for c in np.array_split(keys, min(threads, len(keys))) if len(c)]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda chunk: self.sequential_batch(tree, chunk), chunks))
        results = np.concatenate([r for r, _ in parts])
        return results, sum(loads for _, loads in parts)


def _query(key) -> np.ndarray:
    if isinstance(key, np.ndarray):
        return key.astype(np.uint8, copy=False).reshape(1, KEY_SIZE)
    return np.frombuffer(bytes(key), dtype=np.uint8, count=KEY_SIZE).reshape(1, KEY_SIZE)


def _rows(batch) -> np.ndarray:
    """Accept a SortedBatch, an (n, 32) block or a sequence of keys"""
    if hasattr(batch, "keys") and isinstance(batch.keys, np.ndarray):
        return batch.keys
    if isinstance(batch, np.ndarray):
        return batch.reshape(-1, KEY_SIZE)
    return key_block(batch) if len(batch) else np.zeros((0, KEY_SIZE), dtype=np.uint8)


baseline_searcher = BaselineSearcher()


def point_search(tree: FlatTree, key) -> PointResult:
    return baseline_searcher.point_search(tree, key)


def sequential_batch(tree: FlatTree, batch) -> Tuple[np.ndarray, int]:
    return baseline_searcher.sequential_batch(tree, batch)


def threaded_batch(tree: FlatTree, batch, threads: Optional[int] = None) -> Tuple[np.ndarray, int]:
    return baseline_searcher.threaded_batch(tree, batch, threads)
