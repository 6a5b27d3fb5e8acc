"""Numeric core for batched table-gather costing.

The compiled extension is used when available; otherwise a numpy
implementation with identical semantics takes over.  Set
``AUTOBSS_FORCE_FALLBACK=1`` to skip the extension (used by the kernel
benchmark and tests).
"""
import os

import numpy as np

from . import _fallback

if os.environ.get("AUTOBSS_FORCE_FALLBACK"):
    _impl = _fallback
    BACKEND = "numpy"
else:
    try:
        from . import _speedups as _impl  # type: ignore
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "numpy"


def prepare_tables(tables):
    """Flatten (table, dim_ids) pairs into gather-ready arrays."""
    prepared = []
    for table, dim_ids in tables:
        table = np.ascontiguousarray(table, dtype=np.int64)
        strides = np.array(
            [int(np.prod(table.shape[i + 1:], dtype=np.int64))
             for i in range(table.ndim)], dtype=np.int64)
        prepared.append((table.ravel(),
                         np.asarray(dim_ids, dtype=np.int64), strides))
    return prepared


def gather_cost(base, prepared, idx):
    """Sum table entries addressed by each row of ``idx``, plus ``base``."""
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    return _impl.gather_cost(base, prepared, idx)
