import numpy as np
import pytest

from app.errors import EmptyBatchError, InvalidPartitionError
from app.engines.baseline import point_search, sequential_batch, threaded_batch
from app.engines.batch_engine import sort_and_restore
from app.engines.datagen import generate_batch
from app.engines.tree_model import NOT_FOUND, Key256
from app.models import GenSpec


def test_point_search_hits_and_misses(thirty_tree):
    for value in range(1, 31):
        hit = point_search(thirty_tree, Key256.from_int(value))
        assert hit.value == value
        assert hit.found
        assert hit.loads == 3
    for value in (0, 31, 1 << 200):
        value_, loads = point_search(thirty_tree, Key256.from_int(value))
        assert value_ == NOT_FOUND
        assert loads == 3


def test_sequential_batch_counts_height_per_key(seven_tree):
    keys = [Key256.from_int(v) for v in (70, 10, 10, 45)]
    results, loads = sequential_batch(seven_tree, keys)
    assert results.tolist() == [70, 10, 10, NOT_FOUND]
    assert loads == 4 * 2


@pytest.mark.parametrize("threads", [1, 2, 3, 16])
def test_threaded_matches_sequential(small_tree, threads):
    tree, entries = small_tree
    block = generate_batch(entries, 257, GenSpec(seed=12, hit_ratio=0.6))
    expected, expected_loads = sequential_batch(tree, block)
    results, loads = threaded_batch(tree, block, threads)
    assert np.array_equal(results, expected)
    assert loads == expected_loads == 257 * tree.meta.height_h


def test_accepts_sorted_batches(small_tree):
    tree, entries = small_tree
    batch, _ = sort_and_restore([bytes(row) for row in entries.keys[:40]])
    results, loads = sequential_batch(tree, batch)
    assert results.tolist() == entries.values[:40].tolist()
    assert loads == 40 * tree.meta.height_h


def test_empty_and_bad_thread_counts(seven_tree):
    with pytest.raises(EmptyBatchError):
        sequential_batch(seven_tree, [])
    with pytest.raises(InvalidPartitionError):
        threaded_batch(seven_tree, [Key256.from_int(1)], threads=-1)
