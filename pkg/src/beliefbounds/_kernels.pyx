# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bucket-contraction kernel.

out[p] = sum_s prod_f table_f[gather_f[p*n_sum + s]]

Same contract as _kernels_py.contract_bucket; sequential summation.
"""

from libc.stdlib cimport malloc, free

import numpy as np

cimport numpy as cnp

cnp.import_array()


def contract_bucket(list tables, list gathers, Py_ssize_t n_out, Py_ssize_t n_sum):
    cdef Py_ssize_t nf = len(tables)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_out, dtype=np.float64)
    cdef double **tp = <double **>malloc(nf * sizeof(double *))
    cdef int **gp = <int **>malloc(nf * sizeof(int *))
    if tp == NULL or gp == NULL:
        if tp != NULL:
            free(tp)
        if gp != NULL:
            free(gp)
        raise MemoryError()

    cdef cnp.ndarray[cnp.float64_t, ndim=1] t
    cdef cnp.ndarray[cnp.int32_t, ndim=1] g
    cdef Py_ssize_t f, p, s
    cdef double acc, prod
    cdef Py_ssize_t base

    try:
        for f in range(nf):
            t = tables[f]
            g = gathers[f]
            tp[f] = <double *>cnp.PyArray_DATA(t)
            gp[f] = <int *>cnp.PyArray_DATA(g)
        with nogil:
            for p in range(n_out):
                acc = 0.0
                base = p * n_sum
                for s in range(n_sum):
                    prod = tp[0][gp[0][base + s]]
                    for f in range(1, nf):
                        prod = prod * tp[f][gp[f][base + s]]
                    acc = acc + prod
                out[p] = acc
    finally:
        free(tp)
        free(gp)
    return out
