import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.errors import EmptyEntrySetError, SentinelValueError, UnsortedEntriesError
from app.engines.builder import EntrySet, bulk_load, level_shapes
from app.engines.codec import validate
from app.engines.tree_model import NOT_FOUND, Key256, height_for_entries, key_block

from tests.conftest import int_entries, int_tree


def test_seven_entries_order_four(seven_tree):
    meta = seven_tree.meta
    assert meta.height_h == 2
    assert meta.node_count == 4
    assert seven_tree.nodes_per_level() == [3, 1]

    root = seven_tree.node(0)
    assert root.depth == 1
    assert root.slot_use == 2
    assert [Key256(root.key(s)).to_int() for s in range(2)] == [30, 50]
    assert root.children[:3].tolist() == [160, 320, 480]

    leaves = [seven_tree.node(o) for o in seven_tree.leaf_offsets()]
    assert [leaf.slot_use for leaf in leaves] == [3, 2, 2]
    assert [Key256(leaf.key(0)).to_int() for leaf in leaves] == [10, 40, 60]


def test_single_entry_tree():
    tree = int_tree([42], order_m=16)
    assert tree.meta.height_h == 1
    assert tree.meta.node_count == 1
    leaf = tree.node(0)
    assert leaf.is_leaf and leaf.slot_use == 1
    assert int(leaf.data[0]) == 42


def test_padding_is_zero(seven_tree):
    leaf = seven_tree.node(seven_tree.leaf_offsets()[1])
    assert not leaf.keys[leaf.slot_use:].any()
    assert not leaf.data[leaf.slot_use:].any()
    raw = seven_tree.nodes[leaf.offset + 8:leaf.offset + 32]
    assert raw == bytes(24)


def test_level_shapes_redistribute_last_group():
    assert level_shapes(7, 4) == [[3, 2, 2], [3]]
    assert level_shapes(16, 16) == [[8, 8], [2]]


@pytest.mark.slow
def test_million_entry_census(million_tree):
    assert million_tree.meta.height_h == 6
    assert million_tree.nodes_per_level() == [66667, 4167, 261, 17, 2, 1]
    assert million_tree.node(0).slot_use == 1


@pytest.mark.parametrize("entries", [1, 15, 16, 240, 241, 3840, 3841])
def test_height_matches_boundaries(entries):
    tree = int_tree(range(1, entries + 1), order_m=16)
    assert tree.meta.height_h == height_for_entries(entries, 16)
    assert validate(tree) == []


@settings(max_examples=40, deadline=None)
@given(
    st.sets(st.integers(min_value=0, max_value=(1 << 256) - 1), min_size=1, max_size=400),
    st.sampled_from([4, 8, 16]),
)
def test_bulk_load_preserves_entries(values, order_m):
    entries = int_entries(values, payload=lambda v: v % NOT_FOUND)
    tree = bulk_load(entries, order_m)
    assert validate(tree) == []
    assert tree.entries().as_dict() == entries.as_dict()
    assert tree.meta.entry_count == len(values)


def test_empty_entries_rejected():
    with pytest.raises(EmptyEntrySetError):
        bulk_load(int_entries([]), 16)


def test_unsorted_and_duplicate_entries_rejected():
    keys = key_block([Key256.from_int(v) for v in (5, 3)])
    with pytest.raises(UnsortedEntriesError):
        EntrySet(keys, np.array([5, 3], dtype=np.uint64))
    keys = key_block([Key256.from_int(v) for v in (5, 5)])
    with pytest.raises(UnsortedEntriesError):
        EntrySet(keys, np.array([5, 5], dtype=np.uint64))


def test_sentinel_payload_rejected():
    with pytest.raises(SentinelValueError):
        EntrySet.from_pairs([(Key256.from_int(1), NOT_FOUND)])
