"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The compiled extension is preferred when importable; set
CHAINQUERY_PURE_PYTHON=1 to force the fallback (used by the benchmark).
"""
import os

if os.environ.get("CHAINQUERY_PURE_PYTHON"):
    from chainquery._kernels._py import (  # noqa: F401
        BACKEND, merkle_level, pack_u64_list, pack_u64_pairs, range_bounds,
    )
else:
    try:
        from chainquery._kernels._cy import (  # noqa: F401
            BACKEND, merkle_level, pack_u64_list, pack_u64_pairs, range_bounds,
        )
    except ImportError:
        from chainquery._kernels._py import (  # noqa: F401
            BACKEND, merkle_level, pack_u64_list, pack_u64_pairs, range_bounds,
        )
