"""Timing comparison of the compiled kernels against the pure-Python
fallbacks.

Run with `python3 benchmarks/compare_kernels.py`.  Set
CHAINQUERY_PURE_PYTHON=1 at import time elsewhere to force the fallback
package-wide; here both implementations are imported side by side.
"""
import random
import time

from chainquery._kernels import _py

try:
    from chainquery._kernels import _cy
except ImportError:
    _cy = None

from chainquery.core import DOM_BUCKET

REPS = 200


def bench(fn, *args):
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(REPS):
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best / REPS * 1e6  # microseconds per call


def main():
    rng = random.Random(0)
    pairs = sorted((rng.getrandbits(63), i) for i in range(5000))
    ids = sorted(rng.getrandbits(63) for _ in range(5000))
    keys = sorted(rng.getrandbits(63) for _ in range(5000))
    nodes = [rng.randbytes(32) for _ in range(4096)]

    cases = [
        ("pack_u64_pairs", (pairs,)),
        ("pack_u64_list", (ids,)),
        ("range_bounds", (keys, keys[100], keys[-100])),
        ("merkle_level", (nodes, DOM_BUCKET)),
    ]
    print(f"{'kernel':<16} {'python us':>12} {'cython us':>12} "
          f"{'speedup':>8}")
    for name, args in cases:
        py_us = bench(getattr(_py, name), *args)
        if _cy is None:
            print(f"{name:<16} {py_us:>12.2f} {'n/a':>12} {'n/a':>8}")
            continue
        assert getattr(_cy, name)(*args) == getattr(_py, name)(*args)
        cy_us = bench(getattr(_cy, name), *args)
        print(f"{name:<16} {py_us:>12.2f} {cy_us:>12.2f} "
              f"{py_us / cy_us:>7.2f}x")


if __name__ == "__main__":
    main()
