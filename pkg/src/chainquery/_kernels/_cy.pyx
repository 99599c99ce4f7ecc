# cython: boundscheck=False, wraparound=False
"""Compiled kernels: byte packing, range scans, merkle level folding.

Mirror of the pure-Python module; keep both in sync.
"""
import hashlib

from libc.string cimport memcpy

BACKEND = "cython"

cdef inline void put_u32(unsigned char *dst, unsigned long v):
    dst[0] = (v >> 24) & 0xFF
    dst[1] = (v >> 16) & 0xFF
    dst[2] = (v >> 8) & 0xFF
    dst[3] = v & 0xFF

cdef inline void put_u64(unsigned char *dst, unsigned long long v):
    cdef int i
    for i in range(8):
        dst[7 - i] = <unsigned char>(v & 0xFF)
        v >>= 8


def pack_u64_pairs(pairs):
    """4-byte BE count, then each (a, b) as two 8-byte BE integers."""
    cdef Py_ssize_t n = len(pairs)
    cdef bytes out = bytes(4 + 16 * n)
    cdef unsigned char *buf = <unsigned char *><char *>out
    cdef Py_ssize_t i = 0
    put_u32(buf, <unsigned long>n)
    for a, b in pairs:
        put_u64(buf + 4 + 16 * i, <unsigned long long>a)
        put_u64(buf + 12 + 16 * i, <unsigned long long>b)
        i += 1
    return out


def pack_u64_list(values):
    """4-byte BE count, then each value as an 8-byte BE integer."""
    cdef Py_ssize_t n = len(values)
    cdef bytes out = bytes(4 + 8 * n)
    cdef unsigned char *buf = <unsigned char *><char *>out
    cdef Py_ssize_t i = 0
    put_u32(buf, <unsigned long>n)
    for v in values:
        put_u64(buf + 4 + 8 * i, <unsigned long long>v)
        i += 1
    return out


def range_bounds(sorted_keys, lo, hi):
    """Half-open index window [i, j) of keys with lo <= key <= hi."""
    cdef Py_ssize_t n = len(sorted_keys)
    cdef Py_ssize_t a, b, mid
    cdef unsigned long long klo = <unsigned long long>lo if lo >= 0 else 0
    cdef unsigned long long khi
    cdef unsigned long long k
    if hi < 0:
        return 0, 0
    khi = <unsigned long long>hi
    a = 0
    b = n
    while a < b:
        mid = (a + b) // 2
        k = <unsigned long long>sorted_keys[mid]
        if k < klo:
            a = mid + 1
        else:
            b = mid
    cdef Py_ssize_t i = a
    a = 0
    b = n
    while a < b:
        mid = (a + b) // 2
        k = <unsigned long long>sorted_keys[mid]
        if k <= khi:
            a = mid + 1
        else:
            b = mid
    return i, a


def merkle_level(nodes, domain):
    """Fold one merkle level: hash adjacent pairs, promote an odd tail."""
    cdef bytes prefix = bytes([domain]) + b"\x01"
    cdef Py_ssize_t n = len(nodes)
    cdef Py_ssize_t i
    out = []
    sha256 = hashlib.sha256
    for i in range(0, n - 1, 2):
        out.append(sha256(prefix + nodes[i] + nodes[i + 1]).digest())
    if n % 2:
        out.append(nodes[n - 1])
    return out
