"""NumPy fallback BM25 accumulation kernel.

Mirrors the compiled kernel expression for expression-tree parity:
score[o] += w * (tf * k1p1 / (tf + lennorm[o])). Both kernels must stay
bit-identical; change one, change both.
"""

from __future__ import annotations

import numpy as np

KERNEL_NAME = "numpy"


def bm25_accumulate(ords, tfs, starts, weights, k1p1, lennorm, scores):
    """Add weighted BM25 contributions of each term's postings into scores.

    Term i owns postings ords[starts[i]:starts[i+1]] (unit ordinals, unique
    within a term) and the matching tfs slice; weights[i] already folds in
    idf. lennorm holds k1*(1 - b + b*len/avg) per unit ordinal.
    """
    for i in range(len(weights)):
        lo = starts[i]
        hi = starts[i + 1]
        if lo == hi:
            continue
        o = ords[lo:hi]
        tf = tfs[lo:hi]
        w = weights[i]
        scores[o] += w * (tf * k1p1 / (tf + lennorm[o]))
