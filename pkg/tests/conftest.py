import numpy as np
import pytest

from app.engines.builder import EntrySet, bulk_load
from app.engines.datagen import generate_entries
from app.engines.tree_model import U64_MAX, Key256, block_from_u64
from app.models import GenSpec


def int_entries(values, payload=lambda v: v):
    """EntrySet of narrow keys with the given integer values"""
    return EntrySet.from_pairs((Key256.from_int(v), payload(v)) for v in sorted(values))


def int_tree(values, order_m=4):
    return bulk_load(int_entries(values), order_m)


@pytest.fixture
def seven_tree():
    """7 entries at m=4: leaves hold 3/2/2"""
    return int_tree([10, 20, 30, 40, 50, 60, 70], order_m=4)


@pytest.fixture
def thirty_tree():
    """30 entries at m=4: 10 leaves, 3 inner nodes, a root; 14 nodes, height 3"""
    return int_tree(range(1, 31), order_m=4)


@pytest.fixture
def small_tree():
    spec = GenSpec(entry_count=5000, order_m=16, seed=11)
    entries = generate_entries(spec)
    return bulk_load(entries, 16), entries


@pytest.fixture(scope="session")
def million_entries():
    return generate_entries(GenSpec(entry_count=1_000_000, order_m=16, seed=7))


@pytest.fixture(scope="session")
def million_tree(million_entries):
    return bulk_load(million_entries, 16)


@pytest.fixture(scope="session")
def million_batch(million_entries):
    """1000 distinct keys in ascending order, half of them stored"""
    rng = np.random.default_rng(3)
    hits = million_entries.keys[rng.choice(len(million_entries), size=500, replace=False)]
    stored = {row.tobytes() for row in million_entries.keys}
    candidates = block_from_u64(rng.integers(0, U64_MAX, size=600, dtype=np.uint64))
    misses = np.unique(np.array([row for row in candidates if row.tobytes() not in stored]), axis=0)[:500]
    block = np.unique(np.concatenate([hits, misses]), axis=0)
    assert len(block) == 1000
    return block
