"""
Tree Model
Purpose: Key type, key ordering and the shape formulas every other engine relies on
"""

from enum import IntEnum
from typing import Iterable, Sequence, Union

import numpy as np

from app.errors import CapacityOverflowError, InvalidKeyError, InvalidOrderError

KEY_SIZE = 32
CHUNK_SIZE = 32          # node array is moved in 32-byte chunks
NODE_HEADER_SIZE = 32    # slotUse + depth, padded to one chunk
ADDRESS_SIZE = 8
DATA_SIZE = 8
COUNT_SIZE = 4

U64_MAX = (1 << 64) - 1
NOT_FOUND = U64_MAX      # all-ones payload, the "-1" result


class Ordering(IntEnum):
    LT = -1
    EQ = 0
    GT = 1


class Key256(bytes):
    """
    A 32-byte search/separator key.

    Byte 0 is the most significant, so the inherited bytes ordering is the
    unsigned 256-bit numeric ordering.
    """

    __slots__ = ()

    def __new__(cls, value: Union[bytes, bytearray, memoryview] = bytes(KEY_SIZE)):
        raw = bytes(value)
        if len(raw) != KEY_SIZE:
            raise InvalidKeyError(f"key must be exactly {KEY_SIZE} bytes, got {len(raw)}")
        return super().__new__(cls, raw)

    @classmethod
    def from_int(cls, value: int) -> "Key256":
        if value < 0 or value >= 1 << (8 * KEY_SIZE):
            raise InvalidKeyError(f"{value} does not fit in {KEY_SIZE} bytes")
        return cls(value.to_bytes(KEY_SIZE, "big"))

    @classmethod
    def from_hex(cls, text: str) -> "Key256":
        try:
            raw = bytes.fromhex(text)
        except ValueError as e:
            raise InvalidKeyError(f"not a hex key: {text!r}") from e
        return cls(raw)

    def to_int(self) -> int:
        return int.from_bytes(self, "big")

    def __repr__(self) -> str:
        return f"Key256(0x{self.hex()})"


def compare_keys(a: bytes, b: bytes) -> Ordering:
    """Three-way comparison, byte 0 most significant"""
    if a == b:
        return Ordering.EQ
    return Ordering.LT if a < b else Ordering.GT


def _check_order(order_m: int):
    if order_m < 3:
        raise InvalidOrderError(f"order must be >= 3, got {order_m}")


def _check_u64(value: int, what: str) -> int:
    if value > U64_MAX:
        raise CapacityOverflowError(f"{what} overflows a 64-bit count")
    return value


def node_size(order_m: int) -> int:
    """
    Serialized node size in bytes.

    32 B header + 32 B per key + one 32 B chunk per four 8-byte child
    addresses, which simplifies to 40 B per child pointer.
    """
    _check_order(order_m)
    if order_m % 4:
        raise InvalidOrderError(
            f"order must be a multiple of 4 so child addresses fill whole chunks, got {order_m}"
        )
    k_max = order_m - 1
    size = NODE_HEADER_SIZE + KEY_SIZE * k_max + CHUNK_SIZE * (k_max + 1) // 4
    return size


def n_max(order_m: int, height_h: int) -> int:
    """Node count of a completely full tree of the given height"""
    _check_order(order_m)
    if height_h < 1:
        raise ValueError(f"height must be >= 1, got {height_h}")
    total, level_nodes = 0, 1
    for _ in range(height_h):
        total = _check_u64(total + level_nodes, f"n_max(m={order_m}, h={height_h})")
        level_nodes *= order_m
    return total


def l_max(order_m: int, height_h: int) -> int:
    """Keys that fit at a level before the tree must grow by one level"""
    _check_order(order_m)
    if height_h < 0:
        raise ValueError(f"height must be >= 0, got {height_h}")
    what = f"l_max(m={order_m}, h={height_h})"
    capacity = order_m - 1
    for _ in range(height_h):
        capacity = _check_u64(capacity * order_m, what)
    return _check_u64(capacity, what)


def height_for_entries(entry_count: int, order_m: int) -> int:
    if entry_count < 1:
        raise ValueError("a tree holds at least one entry")
    _check_order(order_m)
    levels = 0
    while entry_count > l_max(order_m, levels):
        levels += 1
    return levels + 1


# ---------------------------------------------------------------------------
# key blocks: (n, 32) uint8 arrays used on the hot paths
# ---------------------------------------------------------------------------

def key_block(keys: Iterable[bytes]) -> np.ndarray:
    """Stack keys into an (n, 32) uint8 array"""
    raw = b"".join(Key256(k) for k in keys)
    return np.frombuffer(raw, dtype=np.uint8).reshape(-1, KEY_SIZE).copy()


def keys_from_block(block: np.ndarray) -> list:
    return [Key256(row.tobytes()) for row in block]


def _first_difference(block: np.ndarray):
    """For each adjacent row pair: whether they differ, and the sign at the first differing word"""
    words = np.ascontiguousarray(block).view(">u8").reshape(len(block), KEY_SIZE // 8)
    left, right = words[:-1], words[1:]
    differs = left != right
    first = differs.argmax(axis=1)
    rows = np.arange(len(first))
    ascending = right[rows, first] > left[rows, first]
    return differs.any(axis=1), ascending


def rows_strictly_ascending(block: np.ndarray) -> bool:
    if len(block) < 2:
        return True
    any_diff, ascending = _first_difference(block)
    return bool(np.all(any_diff & ascending))


def rows_non_decreasing(block: np.ndarray) -> bool:
    if len(block) < 2:
        return True
    any_diff, ascending = _first_difference(block)
    return bool(np.all(~any_diff | ascending))


def first_unsorted_row(block: np.ndarray, strict: bool = True) -> int:
    """Index of the first row that breaks the ordering, or -1"""
    if len(block) < 2:
        return -1
    any_diff, ascending = _first_difference(block)
    ok = any_diff & ascending if strict else ~any_diff | ascending
    bad = np.flatnonzero(~ok)
    return int(bad[0]) + 1 if len(bad) else -1


def low_u64(block: np.ndarray) -> np.ndarray:
    """Low 64 bits of every key, as native uint64"""
    tail = np.ascontiguousarray(block[:, KEY_SIZE - 8:])
    return tail.view(">u8").reshape(-1).astype(np.uint64)


def block_from_u64(values: Sequence[int]) -> np.ndarray:
    """Narrow keys: zero high bytes, value in the low 8 bytes"""
    values = np.asarray(values, dtype=np.uint64)
    block = np.zeros((len(values), KEY_SIZE), dtype=np.uint8)
    block[:, KEY_SIZE - 8:] = values.astype(">u8").view(np.uint8).reshape(-1, 8)
    return block
