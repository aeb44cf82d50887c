"""
Comparator
Purpose: Software model of the key comparison logic

Three stages, mirroring the hardware:
    1. 32 byte comparators per slot, each yielding LT / EQ / GT
    2. CBPC: the first non-EQ byte (byte 0 has priority) decides the slot outcome
    3. priority encoder: the lowest slot with search <= slot key wins

Every slot of a node is evaluated, active or not; padding slots are masked
before the encoder so their contents never influence the decision.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.engines.tree_model import KEY_SIZE, Ordering


@dataclass(frozen=True)
class SlotOutcome:
    le: bool
    eq: bool

    def __post_init__(self):
        if self.eq and not self.le:
            raise ValueError("an exact match is always less-or-equal")


@dataclass(frozen=True)
class SlotSelection:
    slot: int
    eq: bool


def _as_bytes_array(key) -> np.ndarray:
    if isinstance(key, np.ndarray):
        return key.astype(np.uint8, copy=False).reshape(KEY_SIZE)
    return np.frombuffer(bytes(key), dtype=np.uint8, count=KEY_SIZE)


def byte_compare(search, slot) -> np.ndarray:
    """Per-byte verdicts (int8 of -1/0/1, read as Ordering) of search against slot"""
    a = _as_bytes_array(search).astype(np.int16)
    b = _as_bytes_array(slot).astype(np.int16)
    return np.sign(a - b).astype(np.int8)


def verdicts_as_orderings(verdicts: np.ndarray):
    return tuple(Ordering(int(v)) for v in verdicts)


def cbpc_reduce(verdicts) -> SlotOutcome:
    """Collapse byte verdicts into one outcome; only the verdicts are consulted"""
    verdicts = np.asarray(verdicts, dtype=np.int8)
    decisive = np.flatnonzero(verdicts)
    if len(decisive) == 0:
        return SlotOutcome(le=True, eq=True)
    return SlotOutcome(le=bool(verdicts[decisive[0]] < 0), eq=False)


def slot_outcomes(searches: np.ndarray, slot_keys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Compare every search key against every slot key at once.

    searches: (n, 32) uint8, slot_keys: (k, 32) uint8
    returns (le, eq), each (n, k) bool
    """
    verdicts = np.sign(
        searches[:, None, :].astype(np.int16) - slot_keys[None, :, :].astype(np.int16)
    ).astype(np.int8)
    decisive = verdicts != 0
    first = decisive.argmax(axis=2)
    lead = np.take_along_axis(verdicts, first[..., None], axis=2)[..., 0]
    eq = ~decisive.any(axis=2)
    le = eq | (lead < 0)
    return le, eq


def priority_encode(le: np.ndarray, eq: np.ndarray, slot_use: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lowest active slot whose outcome is less-or-equal, per search key.

    Keys above every active slot select `slot_use`, the rightmost child.
    """
    active = le[:, :slot_use]
    hit = active.any(axis=1)
    slots = np.where(hit, active.argmax(axis=1), slot_use)
    rows = np.arange(len(slots))
    exact = hit & eq[rows, np.minimum(slots, slot_use - 1)]
    return slots, exact


def select_slots(searches: np.ndarray, slot_keys: np.ndarray, slot_use: int) -> Tuple[np.ndarray, np.ndarray]:
    le, eq = slot_outcomes(searches, slot_keys)
    return priority_encode(le, eq, slot_use)


def select_slot(search, keys, slot_use: int) -> SlotSelection:
    """Route one key through a node's k_max slots"""
    if isinstance(keys, np.ndarray):
        slot_keys = keys.reshape(-1, KEY_SIZE)
    else:
        slot_keys = np.stack([_as_bytes_array(k) for k in keys])
    if not 1 <= slot_use <= len(slot_keys):
        raise ValueError(f"slot_use {slot_use} outside 1..{len(slot_keys)}")
    slots, exact = select_slots(_as_bytes_array(search)[None, :], slot_keys, slot_use)
    return SlotSelection(slot=int(slots[0]), eq=bool(exact[0]))
