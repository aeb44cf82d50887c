"""
Tree Builder
Purpose: Bulk-load sorted (key, payload) pairs into a flat, breadth-first node array
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Tuple

import numpy as np

from app.errors import EmptyEntrySetError, SentinelValueError, UnsortedEntriesError
from app.engines.flat_tree import FlatTree
from app.engines.tree_model import (
    KEY_SIZE, NODE_HEADER_SIZE, NOT_FOUND, first_unsorted_row, key_block, node_size,
)
from app.models import TreeMeta

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EntrySet:
    """Strictly ascending keys with their payloads; the input of a bulk load"""

    keys: np.ndarray = field(repr=False)     # (n, 32) uint8
    values: np.ndarray = field(repr=False)   # (n,) uint64
    checked: bool = True

    def __post_init__(self):
        if self.keys.ndim != 2 or self.keys.shape[1] != KEY_SIZE:
            raise ValueError(f"keys must have shape (n, {KEY_SIZE})")
        if len(self.keys) != len(self.values):
            raise ValueError("every key needs exactly one payload")
        if not self.checked:
            return
        bad = first_unsorted_row(self.keys, strict=True)
        if bad >= 0:
            raise UnsortedEntriesError(
                f"entry {bad} is not strictly greater than entry {bad - 1}"
            )
        sentinel = np.flatnonzero(self.values == np.uint64(NOT_FOUND))
        if len(sentinel):
            raise SentinelValueError(
                f"entry {int(sentinel[0])} carries the reserved not-found payload"
            )

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[bytes, int]]) -> "EntrySet":
        pairs = list(pairs)
        keys = key_block(k for k, _ in pairs) if pairs else np.zeros((0, KEY_SIZE), np.uint8)
        values = np.array([v for _, v in pairs], dtype=np.uint64)
        return cls(keys, values)

    def __len__(self) -> int:
        return len(self.keys)

    def pairs(self) -> List[Tuple[bytes, int]]:
        return [(k.tobytes(), int(v)) for k, v in zip(self.keys, self.values)]

    def as_dict(self) -> dict:
        return dict(self.pairs())


def _partition(total: int, capacity: int, min_fill: int) -> List[int]:
    """
    Pack `total` items left to right into groups of `capacity`.

    A trailing group below `min_fill` is evened out with its left neighbour.
    A single group is the root and is exempt.
    """
    sizes = [capacity] * (total // capacity)
    if total % capacity:
        sizes.append(total % capacity)
    if len(sizes) > 1 and sizes[-1] < min_fill:
        combined = sizes[-2] + sizes[-1]
        sizes[-2] = (combined + 1) // 2
        sizes[-1] = combined // 2
    return sizes


def level_shapes(entry_count: int, order_m: int) -> List[List[int]]:
    """Group sizes per level, leaves first: entries per leaf, then children per inner node"""
    k_max = order_m - 1
    levels = [_partition(entry_count, k_max, (k_max + 1) // 2)]
    while len(levels[-1]) > 1:
        levels.append(_partition(len(levels[-1]), order_m, (order_m + 1) // 2))
    return levels


class BulkLoader:
    """
    Leaf-packing bulk load at full fill.

    Separators are the maximum key of the subtree on their left, so a key
    equal to a separator routes left and is found in the leaf.
    """

    def load(self, entries: EntrySet, order_m: int) -> FlatTree:
        if len(entries) == 0:
            raise EmptyEntrySetError("cannot build a tree from zero entries")

        size = node_size(order_m)
        k_max = order_m - 1
        tail_at = NODE_HEADER_SIZE + KEY_SIZE * k_max

        levels = level_shapes(len(entries), order_m)
        height = len(levels)
        counts = [len(level) for level in levels]
        node_count = sum(counts)

        # BFS numbering: root level first, so level d (from the leaves) starts after all levels above it
        starts = [sum(counts[d + 1:]) for d in range(height)]

        buf = np.zeros((node_count, size), dtype=np.uint8)
        header = np.zeros((node_count, 2), dtype="<u4")

        # leaves
        payloads = entries.values.astype("<u8").view(np.uint8).reshape(-1, 8)
        leaf_max = np.empty((counts[0], KEY_SIZE), dtype=np.uint8)
        cursor = 0
        for j, used in enumerate(levels[0]):
            row = starts[0] + j
            buf[row, NODE_HEADER_SIZE:NODE_HEADER_SIZE + KEY_SIZE * used] = \
                entries.keys[cursor:cursor + used].reshape(-1)
            buf[row, tail_at:tail_at + 8 * used] = payloads[cursor:cursor + used].reshape(-1)
            header[row] = (used, 0)
            leaf_max[j] = entries.keys[cursor + used - 1]
            cursor += used

        # inner levels, bottom-up
        below_max = leaf_max
        for d in range(1, height):
            level_max = np.empty((counts[d], KEY_SIZE), dtype=np.uint8)
            child = 0
            for j, fanout in enumerate(levels[d]):
                row = starts[d] + j
                used = fanout - 1
                buf[row, NODE_HEADER_SIZE:NODE_HEADER_SIZE + KEY_SIZE * used] = \
                    below_max[child:child + used].reshape(-1)
                addresses = (starts[d - 1] + child + np.arange(fanout, dtype=np.uint64)) * size
                buf[row, tail_at:tail_at + 8 * fanout] = \
                    addresses.astype("<u8").view(np.uint8)
                header[row] = (used, d)
                level_max[j] = below_max[child + fanout - 1]
                child += fanout
            below_max = level_max

        buf[:, 0:8] = header.view(np.uint8).reshape(node_count, 8)

        meta = TreeMeta.for_order(
            order_m=order_m,
            height_h=height,
            node_count=node_count,
            entry_count=len(entries),
        )
        logger.debug(f"bulk load: {len(entries)} entries -> {node_count} nodes, height {height}")
        return FlatTree(meta=meta, nodes=buf.tobytes())


bulk_loader = BulkLoader()


def bulk_load(entries: EntrySet, order_m: int) -> FlatTree:
    return bulk_loader.load(entries, order_m)
