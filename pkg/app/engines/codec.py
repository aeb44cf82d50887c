"""
Tree Codec
Purpose: Byte-exact .bpt files and structural validation of flat trees

File layout:
    0..3    magic "BPTF"
    4..7    version, u32 LE (1)
    8..11   order_m, u32 LE
    12..15  height_h, u32 LE
    16..23  node_count, u64 LE
    24..31  entry_count, u64 LE
    32..39  root_offset, u64 LE (0)
    40..63  zero
    64..    node array
"""

import io
import logging
import struct
from dataclasses import dataclass
from enum import Enum
from typing import BinaryIO, List, Optional, Union

import numpy as np
from pydantic import ValidationError

from app import errors
from app.engines.flat_tree import FlatTree
from app.engines.tree_model import (
    NOT_FOUND, U64_MAX, first_unsorted_row, n_max, node_size, rows_strictly_ascending,
)
from app.models import TreeMeta

logger = logging.getLogger(__name__)

MAGIC = b"BPTF"
VERSION = 1
HEADER = struct.Struct("<4sIIIQQQ24x")
HEADER_SIZE = HEADER.size  # 64
# no 64-bit node count needs more levels, even at order 4
MAX_HEIGHT = 64


class Rule(str, Enum):
    NODE_COUNT = "node_count"
    ENTRY_COUNT = "entry_count"
    ROOT = "root"
    SLOT_USE = "slot_use"
    DEPTH_RANGE = "depth_range"
    KEY_ORDER = "key_order"
    SENTINEL = "sentinel_payload"
    MISALIGNED_CHILD = "misaligned_child"
    CHILD_BOUNDS = "child_out_of_bounds"
    DEPTH_CHAIN = "depth_chain"
    BFS_ORDER = "bfs_order"
    UNDERFULL = "underfull"
    SEPARATOR = "separator"
    ORPHAN = "orphan"


RULE_ERRORS = {
    Rule.NODE_COUNT: errors.NodeCountMismatchError,
    Rule.ENTRY_COUNT: errors.EntryCountMismatchError,
    Rule.ROOT: errors.DepthMismatchError,
    Rule.SLOT_USE: errors.SlotUseError,
    Rule.DEPTH_RANGE: errors.DepthMismatchError,
    Rule.KEY_ORDER: errors.KeyOrderError,
    Rule.SENTINEL: errors.SentinelPayloadError,
    Rule.MISALIGNED_CHILD: errors.MisalignedChildError,
    Rule.CHILD_BOUNDS: errors.ChildOutOfBoundsError,
    Rule.DEPTH_CHAIN: errors.DepthMismatchError,
    Rule.BFS_ORDER: errors.DepthMismatchError,
    Rule.UNDERFULL: errors.UnderfullNodeError,
    Rule.SEPARATOR: errors.SeparatorError,
    Rule.ORPHAN: errors.OrphanNodeError,
}


@dataclass(frozen=True)
class Violation:
    offset: Optional[int]
    rule: Rule
    detail: str

    def to_error(self) -> errors.TreeFormatError:
        return RULE_ERRORS[self.rule](f"{self.rule.value}: {self.detail}", offset=self.offset)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def encode_header(meta: TreeMeta) -> bytes:
    return HEADER.pack(
        MAGIC, VERSION, meta.order_m, meta.height_h,
        meta.node_count, meta.entry_count, meta.root_offset,
    )


def serialize(tree: FlatTree, stream: Optional[BinaryIO] = None) -> bytes:
    """Header then raw node array; written to `stream` when given, and returned"""
    payload = encode_header(tree.meta) + tree.nodes
    if stream is not None:
        stream.write(payload)
    return payload


def deserialize(data: Union[bytes, bytearray, memoryview, BinaryIO]) -> FlatTree:
    """Parse and fully validate a .bpt image; the first violation found is raised"""
    if hasattr(data, "read"):
        data = data.read()
    data = bytes(data)

    if len(data) < HEADER_SIZE:
        raise errors.TruncatedTreeError(f"file holds {len(data)} bytes, header needs {HEADER_SIZE}")
    magic, version, order_m, height_h, node_count, entry_count, root_offset = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise errors.BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise errors.UnsupportedVersionError(f"unsupported version {version}")

    size = node_size(order_m)
    body = data[HEADER_SIZE:]
    if len(body) % size:
        raise errors.TruncatedTreeError(
            f"node array of {len(body)} bytes ends mid-node (node size {size})"
        )
    if len(body) != node_count * size:
        raise errors.NodeCountMismatchError(
            f"header declares {node_count} nodes, file holds {len(body) // size}"
        )
    if not 1 <= height_h <= MAX_HEIGHT:
        raise errors.DepthMismatchError(f"height {height_h} is not a valid tree height (1..{MAX_HEIGHT})")
    if node_count > _capacity(order_m, height_h):
        raise errors.NodeCountMismatchError(
            f"{node_count} nodes cannot fit a height-{height_h} order-{order_m} tree"
        )
    if root_offset != 0:
        raise errors.DepthMismatchError(f"root must sit at offset 0, header says {root_offset}",
                                        offset=root_offset)

    try:
        meta = TreeMeta.for_order(order_m, height_h, node_count, entry_count, root_offset)
    except ValidationError as e:
        raise errors.NodeCountMismatchError(f"inconsistent header: {e}") from e

    tree = FlatTree(meta=meta, nodes=body)
    violations = validate(tree)
    if violations:
        logger.warning(f"rejecting tree: {len(violations)} violation(s), first {violations[0]}")
        raise violations[0].to_error()
    return tree


def to_bytes(tree: FlatTree) -> bytes:
    return serialize(tree)


def from_bytes(data: bytes) -> FlatTree:
    return deserialize(io.BytesIO(data))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def validate(tree: FlatTree) -> List[Violation]:
    """
    Check every tree, node and shape invariant.

    Runs in three phases: header-level counts, node-local rules, then
    cross-node structure. Structure is only inspected once every node is
    locally sound, so a single corrupted field reports a single violation.
    """
    found = _check_counts(tree)
    if found:
        return found
    found = _check_nodes(tree)
    if found:
        return found
    return _check_structure(tree)


def _check_counts(tree: FlatTree) -> List[Violation]:
    meta = tree.meta
    found = []
    if len(tree.nodes) != meta.node_count * meta.node_size:
        found.append(Violation(None, Rule.NODE_COUNT,
                               f"buffer of {len(tree.nodes)} bytes for {meta.node_count} nodes"))
    if meta.node_count == 0:
        found.append(Violation(None, Rule.NODE_COUNT, "tree has no nodes"))
    elif meta.node_count > _capacity(meta.order_m, meta.height_h):
        found.append(Violation(None, Rule.NODE_COUNT,
                               f"{meta.node_count} nodes exceed a height-{meta.height_h} tree"))
    if meta.root_offset != 0:
        found.append(Violation(meta.root_offset, Rule.ROOT, "root must be at offset 0"))
    return found


def _capacity(order_m: int, height_h: int) -> int:
    """n_max, saturating at the largest u64 count"""
    try:
        return n_max(order_m, height_h)
    except errors.CapacityOverflowError:
        return U64_MAX


def _check_nodes(tree: FlatTree) -> List[Violation]:
    meta = tree.meta
    buffer_len = len(tree.nodes)
    found = []
    for node in tree.iter_nodes():
        at = node.offset
        if not 1 <= node.slot_use <= meta.k_max:
            found.append(Violation(at, Rule.SLOT_USE, f"slotUse {node.slot_use} outside 1..{meta.k_max}"))
            continue
        if node.depth >= meta.height_h:
            found.append(Violation(at, Rule.DEPTH_RANGE,
                                   f"depth {node.depth} in a tree of height {meta.height_h}"))
            continue
        if not rows_strictly_ascending(node.active_keys()):
            found.append(Violation(at, Rule.KEY_ORDER, "active keys are not strictly ascending"))
        if node.is_leaf:
            bad = np.flatnonzero(node.data[:node.slot_use] == np.uint64(NOT_FOUND))
            if len(bad):
                found.append(Violation(at, Rule.SENTINEL,
                                       f"slot {int(bad[0])} stores the not-found payload"))
            continue
        for slot, child in enumerate(node.children[:node.slot_use + 1].tolist()):
            if child % meta.node_size:
                found.append(Violation(at, Rule.MISALIGNED_CHILD,
                                       f"child {slot} address {child} is not node-aligned"))
            elif child >= buffer_len:
                found.append(Violation(at, Rule.CHILD_BOUNDS,
                                       f"child {slot} address {child} beyond {buffer_len} bytes"))
    return found


def _check_structure(tree: FlatTree) -> List[Violation]:
    meta = tree.meta
    size = meta.node_size
    found = []
    nodes = list(tree.iter_nodes())
    by_offset = {node.offset: node for node in nodes}

    root = nodes[0]
    if root.depth != meta.height_h - 1:
        found.append(Violation(0, Rule.ROOT, f"root depth {root.depth}, height {meta.height_h}"))

    previous = root.depth
    for node in nodes[1:]:
        if node.depth > previous:
            found.append(Violation(node.offset, Rule.BFS_ORDER,
                                   f"depth {node.depth} follows depth {previous}"))
        previous = node.depth

    min_children = (meta.order_m + 1) // 2
    references = {}
    for node in nodes:
        if node.is_leaf:
            continue
        if node.offset != 0 and node.slot_use + 1 < min_children:
            found.append(Violation(node.offset, Rule.UNDERFULL,
                                   f"{node.slot_use + 1} children, at least {min_children} required"))
        for child in node.children[:node.slot_use + 1].tolist():
            references.setdefault(child, []).append(node.offset)
            if by_offset[child].depth != node.depth - 1:
                found.append(Violation(node.offset, Rule.DEPTH_CHAIN,
                                       f"child at {child} has depth {by_offset[child].depth}, "
                                       f"expected {node.depth - 1}"))

    for node in nodes[1:]:
        parents = references.get(node.offset, [])
        if len(parents) != 1:
            found.append(Violation(node.offset, Rule.ORPHAN,
                                   f"referenced by {len(parents)} parents"))

    if found:
        return found

    # subtree maxima, children always sit after their parent
    subtree_max = {}
    for node in reversed(nodes):
        if node.is_leaf:
            subtree_max[node.offset] = node.key(node.slot_use - 1)
        else:
            subtree_max[node.offset] = subtree_max[int(node.children[node.slot_use])]
    for node in nodes:
        if node.is_leaf:
            continue
        for slot in range(node.slot_use):
            expected = subtree_max[int(node.children[slot])]
            if node.key(slot) != expected:
                found.append(Violation(node.offset, Rule.SEPARATOR,
                                       f"separator {slot} is not the maximum of its subtree"))
        if node.key(node.slot_use - 1) >= subtree_max[int(node.children[node.slot_use])]:
            found.append(Violation(node.offset, Rule.SEPARATOR,
                                   "rightmost subtree does not lie above the last separator"))

    # leaves in breadth-first order must read as one strictly ascending run
    leaves = [node for node in nodes if node.is_leaf]
    bad = first_unsorted_row(np.concatenate([leaf.active_keys() for leaf in leaves]))
    if bad >= 0:
        owner = int(np.repeat([leaf.offset for leaf in leaves], [leaf.slot_use for leaf in leaves])[bad])
        found.append(Violation(owner, Rule.KEY_ORDER,
                               f"leaf key {bad} does not sort above the key before it"))

    stored = sum(node.slot_use for node in nodes if node.is_leaf)
    if stored != meta.entry_count:
        found.append(Violation(None, Rule.ENTRY_COUNT,
                               f"leaves hold {stored} entries, header says {meta.entry_count}"))
    return found
