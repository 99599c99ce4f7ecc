import random

import pytest
from hypothesis import given, settings, strategies as st

from chainquery.trie import (ALPHABET, InvalidCharacter, KeyTooLong, PrefixVO,
                             Trie, verify_prefix, verify_prefix_bytes)
from chainquery.gas import GasMeter


def random_keys(n, seed, minlen=4, maxlen=20):
    rng = random.Random(seed)
    return ["".join(rng.choice(ALPHABET) for _ in range(rng.randint(minlen, maxlen)))
            for _ in range(n)]


def build(pairs):
    trie = Trie()
    for key, eid in pairs:
        trie.insert(key, eid)
    return trie


def oracle(pairs, prefix):
    return sorted({eid for key, eid in pairs if key.startswith(prefix)})


def test_insert_then_prefix_contains():
    trie = build([("2023-01-15", 7)])
    results, vo = trie.prefix_query("2023")
    assert results == [7]
    assert verify_prefix(vo, trie.root_digest(), "2023", results)


def test_invalid_character_rejected():
    trie = Trie()
    with pytest.raises(InvalidCharacter):
        trie.insert("2023_01", 1)
    with pytest.raises(InvalidCharacter):
        trie.insert("", 1)


def test_key_too_long_rejected():
    trie = Trie()
    with pytest.raises(KeyTooLong):
        trie.insert("a" * 65, 1)
    trie.insert("a" * 64, 1)


def test_empty_prefix_returns_all():
    pairs = [(k, i) for i, k in enumerate(random_keys(50, 21))]
    trie = build(pairs)
    results, vo = trie.prefix_query("")
    assert results == oracle(pairs, "")
    assert verify_prefix(vo, trie.root_digest(), "", results)


def test_unmatched_prefix_nonmembership():
    pairs = [("abc", 1), ("abd", 2)]
    trie = build(pairs)
    for prefix in ("abe", "b", "abcdix", "a" * 70):
        results, vo = trie.prefix_query(prefix)
        assert results == []
        assert vo.mode == PrefixVO.MODE_NONMATCH
        assert verify_prefix(vo, trie.root_digest(), prefix, results)


def test_prefix_with_invalid_character_is_empty():
    trie = build([("abc", 1)])
    results, vo = trie.prefix_query("ab_")
    assert results == []
    assert verify_prefix(vo, trie.root_digest(), "ab_", results)


def test_oracle_equivalence():
    pairs = [(k, i) for i, k in enumerate(random_keys(2000, 22))]
    trie = build(pairs)
    rng = random.Random(23)
    keys = [k for k, _ in pairs]
    for _ in range(300):
        src = rng.choice(keys)
        prefix = src[:rng.randint(1, len(src))]
        results, vo = trie.prefix_query(prefix)
        assert results == oracle(pairs, prefix)
        assert verify_prefix(vo, trie.root_digest(), prefix, results)


def test_whole_key_is_its_own_prefix():
    pairs = [(k, i) for i, k in enumerate(random_keys(500, 24))]
    trie = build(pairs)
    for key, _ in pairs:
        results, _ = trie.prefix_query(key)
        assert results == oracle(pairs, key)


def test_descent_visits_equal_prefix_length():
    pairs = [(k, i) for i, k in enumerate(random_keys(200, 25, 32, 40))]
    trie = build(pairs)
    rng = random.Random(26)
    for _ in range(100):
        src = rng.choice(pairs)[0]
        prefix = src[:rng.randint(1, 32)]
        trie.prefix_query(prefix)
        assert trie.last_descent_visits == len(prefix)


def test_digest_consistency_bottom_up():
    pairs = [(k, i) for i, k in enumerate(random_keys(300, 27))]
    trie = build(pairs)

    def recompute(node):
        from chainquery.trie import node_digest
        items = [(i, recompute(node.children[i])) for i in sorted(node.children)]
        d = node_digest(node.char_index, node.entry_ids, items)
        assert d == node.node_digest
        return d

    recompute(trie.root)


def test_shared_key_multiple_ids():
    trie = build([("cafe", 3), ("cafe", 1), ("cafe", 1)])
    results, vo = trie.prefix_query("cafe")
    assert results == [1, 3]
    assert verify_prefix(vo, trie.root_digest(), "cafe", results)


def test_result_mutations_rejected():
    pairs = [(k, i) for i, k in enumerate(random_keys(80, 28))]
    trie = build(pairs)
    prefix = pairs[0][0][:2]
    results, vo = trie.prefix_query(prefix)
    root = trie.root_digest()
    for i in range(len(results)):
        assert not verify_prefix(vo, root, prefix, results[:i] + results[i + 1:])
    absent = max(eid for _, eid in pairs) + 5
    assert not verify_prefix(vo, root, prefix, sorted(results + [absent]))
    assert not verify_prefix(vo, b"\x00" * 32, prefix, results)


@pytest.mark.parametrize("prefix_len", [0, 1, 3])
def test_vo_byte_fuzz_rejected(prefix_len):
    pairs = [(k, i) for i, k in enumerate(random_keys(40, 29, 4, 8))]
    trie = build(pairs)
    prefix = pairs[3][0][:prefix_len]
    results, vo = trie.prefix_query(prefix)
    root = trie.root_digest()
    blob = vo.to_bytes()
    assert verify_prefix_bytes(blob, root, prefix, results)
    for pos in range(len(blob)):
        for flip in (1, 0x80):
            mutated = bytearray(blob)
            mutated[pos] ^= flip
            assert not verify_prefix_bytes(bytes(mutated), root, prefix,
                                           results), f"escape at byte {pos}"


def test_nonmatch_vo_byte_fuzz_rejected():
    trie = build([("abc", 1), ("abd", 2), ("ff:0", 3)])
    prefix = "abx1"
    results, vo = trie.prefix_query(prefix)
    assert results == []
    root = trie.root_digest()
    blob = vo.to_bytes()
    assert verify_prefix_bytes(blob, root, prefix, results)
    for pos in range(len(blob)):
        for flip in (1, 0x80):
            mutated = bytearray(blob)
            mutated[pos] ^= flip
            assert not verify_prefix_bytes(bytes(mutated), root, prefix,
                                           results), f"escape at byte {pos}"


def test_vo_roundtrip_bytes():
    pairs = [(k, i) for i, k in enumerate(random_keys(100, 30))]
    trie = build(pairs)
    prefix = pairs[0][0][:3]
    results, vo = trie.prefix_query(prefix)
    blob = vo.to_bytes()
    vo2 = PrefixVO.from_bytes(blob)
    assert vo2.to_bytes() == blob
    assert verify_prefix(vo2, trie.root_digest(), prefix, results)


def test_metered_writes_on_insert():
    meter = GasMeter()
    trie = Trie(meter=meter)
    trie.insert("abcd", 1)
    assert meter.storage_writes > 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(
    st.text(alphabet=ALPHABET, min_size=1, max_size=12),
    st.integers(min_value=0, max_value=1000)), max_size=30),
    st.text(alphabet=ALPHABET, max_size=6))
def test_property_oracle(pairs, prefix):
    trie = build(pairs)
    results, vo = trie.prefix_query(prefix)
    assert results == oracle(pairs, prefix)
    assert verify_prefix(vo, trie.root_digest(), prefix, results)
