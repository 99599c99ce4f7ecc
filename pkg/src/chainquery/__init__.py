"""Verifiable hybrid-storage query middleware.

On-chain-style metadata lives in a simulated append-only ledger, payloads
in a content-addressed store, and a SQL subset is served through
authenticated time-range and prefix indexes whose query results carry
verification objects checkable against ledger-anchored root digests.
"""
from chainquery._kernels import BACKEND as KERNEL_BACKEND  # noqa: F401

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
