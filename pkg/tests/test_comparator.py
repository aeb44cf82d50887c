import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.engines.comparator import (
    SlotOutcome, byte_compare, cbpc_reduce, priority_encode, select_slot, select_slots, slot_outcomes,
    verdicts_as_orderings,
)
from app.engines.tree_model import KEY_SIZE, Key256, Ordering, block_from_u64, key_block

keys_256 = st.integers(min_value=0, max_value=(1 << 256) - 1)


def linear_scan(search: bytes, keys, slot_use: int):
    for slot in range(slot_use):
        if search <= keys[slot]:
            return slot, search == keys[slot]
    return slot_use, False


def test_byte_verdicts():
    a = Key256(b"\x00\x05" + b"\x00" * 30)
    b = Key256(b"\x00\x03" + b"\x09" * 30)
    verdicts = verdicts_as_orderings(byte_compare(a, b))
    assert verdicts[0] == Ordering.EQ
    assert verdicts[1] == Ordering.GT
    assert verdicts[2] == Ordering.LT


def test_first_decisive_byte_wins():
    verdicts = np.zeros(KEY_SIZE, dtype=np.int8)
    verdicts[3] = 1
    verdicts[4:] = -1
    assert cbpc_reduce(verdicts) == SlotOutcome(le=False, eq=False)
    verdicts[3] = -1
    assert cbpc_reduce(verdicts) == SlotOutcome(le=True, eq=False)
    assert cbpc_reduce(np.zeros(KEY_SIZE, dtype=np.int8)) == SlotOutcome(le=True, eq=True)


def test_exact_match_implies_le():
    with pytest.raises(ValueError):
        SlotOutcome(le=False, eq=True)


@settings(max_examples=500)
@given(keys_256, keys_256)
def test_reduction_agrees_with_integer_order(a, b):
    outcome = cbpc_reduce(byte_compare(Key256.from_int(a), Key256.from_int(b)))
    assert outcome.le == (a <= b)
    assert outcome.eq == (a == b)


def test_vectorised_agreement_on_random_pairs():
    rng = np.random.default_rng(5)
    left = np.frombuffer(rng.bytes(20000 * KEY_SIZE), dtype=np.uint8).reshape(-1, KEY_SIZE).copy()
    right = left.copy()
    # share long prefixes so late bytes decide
    right[::2, 20:] = np.frombuffer(rng.bytes(10000 * 12), dtype=np.uint8).reshape(-1, 12)
    right[1::4] = left[1::4]
    for lo in range(0, len(left), 100):
        a, b = left[lo:lo + 100], right[lo:lo + 100]
        le, eq = slot_outcomes(a, b)
        diag_le, diag_eq = np.diagonal(le), np.diagonal(eq)
        expected = [(x.tobytes() <= y.tobytes(), x.tobytes() == y.tobytes()) for x, y in zip(a, b)]
        assert diag_le.tolist() == [e[0] for e in expected]
        assert diag_eq.tolist() == [e[1] for e in expected]


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.integers(min_value=0, max_value=1 << 40), min_size=15, max_size=15, unique=True),
    st.integers(min_value=1, max_value=15),
    st.integers(min_value=0, max_value=(1 << 40) + 1),
)
def test_select_slot_matches_linear_scan(values, slot_use, query):
    keys = [Key256.from_int(v) for v in sorted(values)]
    search = Key256.from_int(query)
    selected = select_slot(search, key_block(keys), slot_use)
    assert (selected.slot, selected.eq) == linear_scan(search, keys, slot_use)


def test_select_slot_over_every_slot_use():
    rng = np.random.default_rng(9)
    for _ in range(200):
        values = np.sort(rng.choice(1 << 20, size=15, replace=False))
        keys = [Key256.from_int(int(v)) for v in values]
        block = key_block(keys)
        queries = [Key256.from_int(int(p)) for p in rng.integers(0, 1 << 20, size=8)] + keys[:3]
        for slot_use in range(1, 16):
            slots, exact = select_slots(key_block(queries), block, slot_use)
            for search, slot, eq in zip(queries, slots.tolist(), exact.tolist()):
                assert (slot, eq) == linear_scan(search, keys, slot_use)


def test_padding_slots_are_ignored():
    keys = [Key256.from_int(v) for v in (10, 20, 30)]
    clean = key_block(keys + [Key256(bytes(KEY_SIZE))] * 12)
    noisy = clean.copy()
    noisy[3:] = 0xFF
    noisy[5] = 0
    for query in (5, 10, 25, 30, 31, 1 << 100):
        search = Key256.from_int(query)
        assert select_slot(search, clean, 3) == select_slot(search, noisy, 3)


def test_above_every_key_routes_right():
    keys = key_block([Key256.from_int(v) for v in (10, 20, 30)])
    assert select_slot(Key256.from_int(31), keys, 3).slot == 3
    assert select_slot(Key256.from_int(20), keys, 3).eq


def test_priority_encoder_masks_inactive_slots():
    le = np.array([[False, False, True, True]])
    eq = np.array([[False, False, True, False]])
    slots, exact = priority_encode(le, eq, 2)
    assert slots.tolist() == [2]
    assert exact.tolist() == [False]


def test_slot_use_out_of_range():
    keys = key_block([Key256.from_int(1)] * 3)
    with pytest.raises(ValueError):
        select_slot(Key256.from_int(1), keys, 0)
    with pytest.raises(ValueError):
        select_slot(Key256.from_int(1), keys, 4)


@pytest.mark.slow
def test_million_pairs_agree_with_integer_order():
    rng = np.random.default_rng(17)
    searches = np.frombuffer(rng.bytes(1000 * KEY_SIZE), dtype=np.uint8).reshape(-1, KEY_SIZE).copy()
    slot_keys = np.frombuffer(rng.bytes(1000 * KEY_SIZE), dtype=np.uint8).reshape(-1, KEY_SIZE).copy()
    # long shared prefixes and exact copies so late bytes and ties decide too
    slot_keys[::3, :28] = searches[::3, :28]
    slot_keys[1::10] = searches[1::10]
    search_ints = [int.from_bytes(row.tobytes(), "big") for row in searches]
    slot_ints = [int.from_bytes(row.tobytes(), "big") for row in slot_keys]

    for lo in range(0, 1000, 100):
        le, eq = slot_outcomes(searches[lo:lo + 100], slot_keys)
        expected_le = np.array([[a <= b for b in slot_ints] for a in search_ints[lo:lo + 100]])
        expected_eq = np.array([[a == b for b in slot_ints] for a in search_ints[lo:lo + 100]])
        assert np.array_equal(le, expected_le)
        assert np.array_equal(eq, expected_eq)

    for a, b in zip(searches[::7], slot_keys[::7]):
        outcome = cbpc_reduce(byte_compare(a, b))
        assert (outcome.le, outcome.eq) == (a.tobytes() <= b.tobytes(), a.tobytes() == b.tobytes())


@pytest.mark.slow
def test_hundred_thousand_slot_arrays_every_slot_use():
    rng = np.random.default_rng(23)
    arrays, k_max, chunk = 100_000, 15, 25
    values = np.sort(rng.integers(0, 1 << 32, size=(arrays, k_max)), axis=1) + np.arange(k_max)
    queries = np.where(
        rng.random(arrays) < 0.5,
        values[np.arange(arrays), rng.integers(0, k_max, size=arrays)],
        rng.integers(0, (1 << 32) + k_max, size=arrays),
    )
    # a random prefix per array, shared by its keys and its query
    prefixes = np.frombuffer(rng.bytes(arrays * 24), dtype=np.uint8).reshape(arrays, 24)
    slot_keys = block_from_u64(values.reshape(-1)).reshape(arrays, k_max, KEY_SIZE)
    slot_keys[:, :, :24] = prefixes[:, None, :]
    searches = block_from_u64(queries)
    searches[:, :24] = prefixes

    rows = np.arange(arrays)
    expected = {}
    for slot_use in range(1, k_max + 1):
        le_ref = queries[:, None] <= values[:, :slot_use]
        slots = np.where(le_ref.any(axis=1), le_ref.argmax(axis=1), slot_use)
        exact = le_ref.any(axis=1) & (values[rows, np.minimum(slots, slot_use - 1)] == queries)
        expected[slot_use] = (slots, exact)

    own = np.arange(chunk)
    for lo in range(0, arrays, chunk):
        le, eq = slot_outcomes(searches[lo:lo + chunk], slot_keys[lo:lo + chunk].reshape(-1, KEY_SIZE))
        # keep each query's row against its own array
        le = le.reshape(chunk, chunk, k_max)[own, own]
        eq = eq.reshape(chunk, chunk, k_max)[own, own]
        for slot_use, (slots, exact) in expected.items():
            got_slots, got_exact = priority_encode(le, eq, slot_use)
            assert np.array_equal(got_slots, slots[lo:lo + chunk])
            assert np.array_equal(got_exact, exact[lo:lo + chunk])
