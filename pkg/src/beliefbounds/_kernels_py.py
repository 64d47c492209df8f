"""Pure-numpy fallback for the bucket-contraction kernel.

Semantics must match _kernels.pyx: given flat float64 factor tables and, per
table, an int32 gather map of length n_out*n_sum, compute

    out[p] = sum_s  prod_f  table_f[gather_f[p*n_sum + s]]

i.e. an elementwise product of the gathered tables followed by a sum over the
trailing n_sum block. Summation order may differ bitwise from the compiled
kernel (pairwise vs sequential); agreement is within float tolerance.
"""

from __future__ import annotations

import numpy as np


def contract_bucket(tables, gathers, n_out: int, n_sum: int) -> np.ndarray:
    prod = tables[0][gathers[0]]
    for t, g in zip(tables[1:], gathers[1:]):
        prod = prod * t[g]
    if n_sum == 1:
        return prod.reshape(n_out).copy()
    return prod.reshape(n_out, n_sum).sum(axis=1)
