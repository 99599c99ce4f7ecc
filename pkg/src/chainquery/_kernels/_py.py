"""Pure-Python kernels: byte packing, range scans, merkle level folding.

Mirror of the Cython module; keep both in sync.
"""
import hashlib
from bisect import bisect_left, bisect_right

BACKEND = "python"


def pack_u64_pairs(pairs):
    """4-byte BE count, then each (a, b) as two 8-byte BE integers."""
    out = bytearray(len(pairs).to_bytes(4, "big"))
    for a, b in pairs:
        out += a.to_bytes(8, "big")
        out += b.to_bytes(8, "big")
    return bytes(out)


def pack_u64_list(values):
    """4-byte BE count, then each value as an 8-byte BE integer."""
    out = bytearray(len(values).to_bytes(4, "big"))
    for v in values:
        out += v.to_bytes(8, "big")
    return bytes(out)


def range_bounds(sorted_keys, lo, hi):
    """Half-open index window [i, j) of keys with lo <= key <= hi."""
    return bisect_left(sorted_keys, lo), bisect_right(sorted_keys, hi)


def merkle_level(nodes, domain):
    """Fold one merkle level: hash adjacent pairs, promote an odd tail."""
    prefix = bytes([domain]) + b"\x01"
    out = []
    n = len(nodes)
    for i in range(0, n - 1, 2):
        out.append(hashlib.sha256(prefix + nodes[i] + nodes[i + 1]).digest())
    if n % 2:
        out.append(nodes[-1])
    return out
