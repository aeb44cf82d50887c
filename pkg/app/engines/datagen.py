"""
Data Generator
Purpose: Seeded, reproducible tree entries and query batches

Narrow keys (default) have zero high bytes and a uniform random low 64-bit
word; wide keys are 32 uniform random bytes. A key's payload is its low 64
bits, so keys whose low word is all ones are never generated.
"""

import logging
import math
from fractions import Fraction

import numpy as np

from app.engines.builder import EntrySet
from app.engines.tree_model import KEY_SIZE, NOT_FOUND, U64_MAX, block_from_u64, low_u64
from app.models import GenSpec

logger = logging.getLogger(__name__)


def _draw_keys(rng: np.random.Generator, count: int, wide: bool) -> np.ndarray:
    if wide:
        raw = rng.bytes(count * KEY_SIZE)
        return np.frombuffer(raw, dtype=np.uint8).reshape(count, KEY_SIZE).copy()
    words = rng.integers(0, U64_MAX, size=count, dtype=np.uint64, endpoint=False)
    return block_from_u64(words)


def _unique_sorted(block: np.ndarray) -> np.ndarray:
    if len(block) == 0:
        return block
    return np.unique(block, axis=0)


class DataGenerator:

    def entries(self, spec: GenSpec) -> EntrySet:
        """`entry_count` distinct keys in ascending order with payload = low 64 bits"""
        rng = np.random.default_rng(spec.seed)
        pool = np.zeros((0, KEY_SIZE), dtype=np.uint8)
        while len(pool) < spec.entry_count:
            missing = spec.entry_count - len(pool)
            fresh = _draw_keys(rng, missing + missing // 8 + 16, spec.wide_keys)
            fresh = fresh[low_u64(fresh) != np.uint64(NOT_FOUND)]
            pool = _unique_sorted(np.concatenate([pool, fresh]))
        if len(pool) > spec.entry_count:
            keep = np.sort(rng.choice(len(pool), size=spec.entry_count, replace=False))
            pool = pool[keep]
        logger.debug(f"generated {len(pool)} entries (seed {spec.seed}, wide={spec.wide_keys})")
        return EntrySet(np.ascontiguousarray(pool), low_u64(pool))

    def batch(self, stored: EntrySet, size: int, spec: GenSpec) -> np.ndarray:
        """
        ceil(hit_ratio * size) keys drawn uniformly from stored entries, the
        rest absent keys (rejected and resampled against the stored set),
        returned shuffled in generation order as an (size, 32) block.
        """
        if size < 1:
            raise ValueError("batch size must be at least 1")
        if not 0.0 <= spec.hit_ratio <= 1.0:
            raise ValueError(f"hit_ratio {spec.hit_ratio} outside [0, 1]")
        rng = np.random.default_rng(spec.seed)
        hits = min(size, math.ceil(Fraction(str(spec.hit_ratio)) * size))
        misses = size - hits

        picked = stored.keys[rng.integers(0, len(stored), size=hits)] if hits else \
            np.zeros((0, KEY_SIZE), dtype=np.uint8)

        present = {row.tobytes() for row in stored.keys} if misses else set()
        absent = []
        while len(absent) < misses:
            for row in _draw_keys(rng, misses - len(absent), spec.wide_keys):
                raw = row.tobytes()
                if raw not in present:
                    absent.append(row)
        absent_block = np.stack(absent) if absent else np.zeros((0, KEY_SIZE), dtype=np.uint8)

        block = np.concatenate([picked, absent_block])
        return np.ascontiguousarray(block[rng.permutation(len(block))])


data_generator = DataGenerator()


def generate_entries(spec: GenSpec) -> EntrySet:
    return data_generator.entries(spec)


def generate_batch(stored: EntrySet, size: int, spec: GenSpec) -> np.ndarray:
    return data_generator.batch(stored, size, spec)
