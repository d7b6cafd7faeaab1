# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=False
"""Compiled BM25 accumulation kernel.

Same per-element expression as the NumPy fallback, evaluated in the same
order, so both produce bit-identical doubles. cdivision stays off only for
the annotation default; tf + lennorm is always > 0 for real postings.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

KERNEL_NAME = "cython"


def bm25_accumulate(
    cnp.int32_t[::1] ords,
    cnp.float64_t[::1] tfs,
    cnp.int64_t[::1] starts,
    cnp.float64_t[::1] weights,
    double k1p1,
    cnp.float64_t[::1] lennorm,
    cnp.float64_t[::1] scores,
):
    """Add weighted BM25 contributions of each term's postings into scores.

    Term i owns postings ords[starts[i]:starts[i+1]] (unit ordinals, unique
    within a term) and the matching tfs slice; weights[i] already folds in
    idf. lennorm holds k1*(1 - b + b*len/avg) per unit ordinal.
    """
    cdef Py_ssize_t i, j, lo, hi
    cdef Py_ssize_t n_terms = weights.shape[0]
    cdef double w, tf
    cdef cnp.int32_t o
    for i in range(n_terms):
        lo = starts[i]
        hi = starts[i + 1]
        if lo == hi:
            continue
        w = weights[i]
        for j in range(lo, hi):
            o = ords[j]
            tf = tfs[j]
            scores[o] += w * (tf * k1p1 / (tf + lennorm[o]))
