"""Pure-numpy implementation of the table-gather cost kernel."""
import numpy as np


def gather_cost(base, prepared, idx):
    total = np.full(idx.shape[0], base, dtype=np.int64)
    for flat, dim_ids, strides in prepared:
        lin = idx[:, dim_ids] @ strides
        total += flat[lin]
    return total
