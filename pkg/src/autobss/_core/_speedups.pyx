# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled table-gather cost kernel."""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def gather_cost(long long base, list prepared, cnp.int64_t[:, ::1] idx):
    cdef Py_ssize_t n = idx.shape[0]
    out_arr = np.full(n, base, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef cnp.int64_t[::1] flat, dim_ids, strides
    cdef Py_ssize_t r, d, nd
    cdef cnp.int64_t lin
    for flat_o, dim_o, stride_o in prepared:
        flat = flat_o
        dim_ids = dim_o
        strides = stride_o
        nd = dim_ids.shape[0]
        for r in range(n):
            lin = 0
            for d in range(nd):
                lin += idx[r, dim_ids[d]] * strides[d]
            out[r] += flat[lin]
    return out_arr
