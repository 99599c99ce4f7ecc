"""Compiled and pure-Python kernels must agree exactly."""
import random

from hypothesis import given, strategies as st

from chainquery._kernels import _py

try:
    from chainquery._kernels import _cy
except ImportError:
    _cy = None

import pytest

pytestmark = pytest.mark.skipif(_cy is None, reason="extension not built")

u64 = st.integers(min_value=0, max_value=(1 << 64) - 1)


@given(st.lists(st.tuples(u64, u64), max_size=50))
def test_pack_pairs_parity(pairs):
    assert _cy.pack_u64_pairs(pairs) == _py.pack_u64_pairs(pairs)


@given(st.lists(u64, max_size=50))
def test_pack_list_parity(values):
    assert _cy.pack_u64_list(values) == _py.pack_u64_list(values)


@given(st.lists(u64, max_size=60), u64, u64)
def test_range_bounds_parity(keys, lo, hi):
    keys = sorted(keys)
    assert _cy.range_bounds(keys, lo, hi) == _py.range_bounds(keys, lo, hi)


def test_range_bounds_negative_lo():
    assert _cy.range_bounds([1, 2, 3], -5, 2) == _py.range_bounds([1, 2, 3], 0, 2)


@given(st.lists(st.binary(min_size=32, max_size=32), min_size=1, max_size=33))
def test_merkle_level_parity(nodes):
    assert _cy.merkle_level(nodes, 0x02) == _py.merkle_level(nodes, 0x02)


def test_pack_layout():
    assert _py.pack_u64_pairs([(1, 2)]) == (
        b"\x00\x00\x00\x01" + (1).to_bytes(8, "big") + (2).to_bytes(8, "big"))
    assert _py.pack_u64_list([]) == b"\x00\x00\x00\x00"


def test_random_cross_check():
    rng = random.Random(7)
    keys = sorted(rng.randrange(1 << 40) for _ in range(500))
    for _ in range(200):
        lo = rng.randrange(1 << 40)
        hi = rng.randrange(1 << 40)
        assert _cy.range_bounds(keys, lo, hi) == _py.range_bounds(keys, lo, hi)
