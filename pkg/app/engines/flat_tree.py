"""
Flat Tree
Purpose: The BFS-ordered node array and read access to individual nodes

Node layout (node_size = 40 * m bytes):
    0..3     slotUse, u32 LE
    4..7     depth, u32 LE (0 = leaf)
    8..31    zero
    32..     k_max keys of 32 bytes
    then     inner: k_max + 1 child byte-offsets, u64 LE
             leaf:  k_max payloads, u64 LE, followed by 8 unused bytes
"""

import struct
from dataclasses import dataclass, field
from typing import Iterator, List

import numpy as np

from app.errors import CorruptTreeError
from app.engines.tree_model import ADDRESS_SIZE, KEY_SIZE, NODE_HEADER_SIZE
from app.models import TreeMeta

NODE_HEADER = struct.Struct("<II")


@dataclass(frozen=True)
class NodeView:
    """Decoded node. Arrays are read-only views into the tree buffer."""

    offset: int
    slot_use: int
    depth: int
    keys: np.ndarray       # (k_max, 32) uint8
    tail: np.ndarray       # (k_max + 1,) uint64: children, or payloads + unused word

    @property
    def is_leaf(self) -> bool:
        return self.depth == 0

    @property
    def children(self) -> np.ndarray:
        return self.tail

    @property
    def data(self) -> np.ndarray:
        return self.tail[:-1]

    def active_keys(self) -> np.ndarray:
        return self.keys[:self.slot_use]

    def key(self, slot: int) -> bytes:
        return self.keys[slot].tobytes()


@dataclass(frozen=True)
class FlatTree:
    meta: TreeMeta
    nodes: bytes = field(repr=False)

    def __post_init__(self):
        if len(self.nodes) != self.meta.nodes_bytes:
            raise CorruptTreeError(
                f"node buffer holds {len(self.nodes)} bytes, "
                f"expected {self.meta.node_count} x {self.meta.node_size}"
            )

    @property
    def node_size(self) -> int:
        return self.meta.node_size

    @property
    def height(self) -> int:
        return self.meta.height_h

    def offsets(self) -> range:
        return range(0, len(self.nodes), self.meta.node_size)

    def check_address(self, offset: int):
        if offset % self.meta.node_size:
            raise CorruptTreeError(f"child address {offset} is not node-aligned", offset=offset)
        if offset < 0 or offset >= len(self.nodes):
            raise CorruptTreeError(
                f"child address {offset} is outside the {len(self.nodes)}-byte node array",
                offset=offset,
            )

    def header(self, offset: int):
        """(slot_use, depth) without decoding the rest of the node"""
        return NODE_HEADER.unpack_from(self.nodes, offset)

    def node(self, offset: int) -> NodeView:
        """Fetch one node; this is the unit every search engine counts as a load"""
        self.check_address(offset)
        k_max = self.meta.k_max
        slot_use, depth = NODE_HEADER.unpack_from(self.nodes, offset)
        keys = np.frombuffer(
            self.nodes, dtype=np.uint8, count=KEY_SIZE * k_max, offset=offset + NODE_HEADER_SIZE
        ).reshape(k_max, KEY_SIZE)
        tail = np.frombuffer(
            self.nodes, dtype="<u8", count=k_max + 1,
            offset=offset + NODE_HEADER_SIZE + KEY_SIZE * k_max,
        )
        return NodeView(offset=offset, slot_use=slot_use, depth=depth, keys=keys, tail=tail)

    def iter_nodes(self) -> Iterator[NodeView]:
        for offset in self.offsets():
            yield self.node(offset)

    def nodes_per_level(self) -> List[int]:
        """Node count at each depth, index 0 = leaves"""
        counts = [0] * self.meta.height_h
        for offset in self.offsets():
            _, depth = self.header(offset)
            if depth < len(counts):
                counts[depth] += 1
        return counts

    def leaf_offsets(self) -> List[int]:
        return [o for o in self.offsets() if self.header(o)[1] == 0]

    def entries(self):
        """All stored (key, payload) pairs in key order"""
        from app.engines.builder import EntrySet

        keys, values = [], []
        for offset in self.leaf_offsets():
            leaf = self.node(offset)
            keys.append(leaf.active_keys())
            values.append(leaf.data[:leaf.slot_use])
        if not keys:
            return EntrySet(
                np.zeros((0, KEY_SIZE), dtype=np.uint8), np.zeros(0, dtype=np.uint64), checked=False
            )
        return EntrySet(np.concatenate(keys), np.concatenate(values).astype(np.uint64))

    def child_address_bytes(self, offset: int, slot: int) -> int:
        """Byte position of a child slot inside the buffer, for corruption tooling"""
        return offset + NODE_HEADER_SIZE + KEY_SIZE * self.meta.k_max + ADDRESS_SIZE * slot
