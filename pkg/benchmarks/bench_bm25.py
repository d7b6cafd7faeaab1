"""Benchmark the compiled BM25 kernel against the NumPy fallback.

Builds one synthetic index, prepares each query's posting arrays exactly the
way bm25_search does, then times only the accumulation kernel. Both kernels
must produce bit-identical score vectors; the benchmark asserts that before
reporting timings.

    python3 benchmarks/bench_bm25.py --units 20000 --queries 200
"""

from __future__ import annotations

import argparse
import random
import time

import numpy as np

from leex._bm25_kernel_py import bm25_accumulate as numpy_kernel
from leex.index import build_index

try:
    from leex._bm25_kernel import bm25_accumulate as cython_kernel
except ImportError:
    cython_kernel = None


def synthetic_index(rng: random.Random, units: int, vocab_size: int, terms_per_unit: int):
    vocab = [f"t{i:05d}" for i in range(vocab_size)]
    zipf = [1.0 / (r + 1) for r in range(vocab_size)]
    return build_index(
        (
            (f"u{i:06d}", rng.choices(vocab, weights=zipf, k=terms_per_unit))
            for i in range(units)
        ),
        "word",
    ), vocab


def prepare_query(index, rng: random.Random, vocab: list[str], n_terms: int):
    """Concatenated posting arrays for one query, mirroring bm25_search."""
    ords_parts, tfs_parts, weights = [], [], []
    for term in rng.sample(vocab[: len(vocab) // 4], k=n_terms):
        entry = index.postings.get(term)
        if entry is None:
            continue
        ords_parts.append(entry[0])
        tfs_parts.append(entry[1])
        weights.append(rng.uniform(0.1, 1.0) * index.idf(term))
    starts = np.zeros(len(weights) + 1, dtype=np.int64)
    np.cumsum([len(p) for p in ords_parts], out=starts[1:])
    return (
        np.concatenate(ords_parts),
        np.concatenate(tfs_parts),
        starts,
        np.array(weights, dtype=np.float64),
    )


def time_kernel(kernel, queries, k1p1, lennorm, n_units: int, repeats: int) -> float:
    scores = np.zeros(n_units, dtype=np.float64)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for ords, tfs, starts, weights in queries:
            scores[:] = 0.0
            kernel(ords, tfs, starts, weights, k1p1, lennorm, scores)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--units", type=int, default=20000)
    ap.add_argument("--vocab", type=int, default=2000)
    ap.add_argument("--terms-per-unit", type=int, default=80)
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--query-terms", type=int, default=8)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    build_start = time.perf_counter()
    index, vocab = synthetic_index(rng, args.units, args.vocab, args.terms_per_unit)
    queries = [
        prepare_query(index, rng, vocab, args.query_terms) for _ in range(args.queries)
    ]
    postings = sum(len(q[0]) for q in queries)
    print(
        f"index: {args.units} units, vocab {args.vocab}, "
        f"built in {time.perf_counter() - build_start:.1f}s; "
        f"{args.queries} queries touching {postings} postings"
    )

    k1p1 = 1.9
    lennorm = index._lennorm(0.9, 0.4)
    if cython_kernel is not None:
        want = np.zeros(index.n_units)
        got = np.zeros(index.n_units)
        for ords, tfs, starts, weights in queries[:10]:
            want[:] = 0.0
            got[:] = 0.0
            numpy_kernel(ords, tfs, starts, weights, k1p1, lennorm, want)
            cython_kernel(ords, tfs, starts, weights, k1p1, lennorm, got)
            assert np.array_equal(want, got), "kernels disagree"
        print("kernel outputs bit-identical on 10 spot-check queries")

    numpy_time = time_kernel(
        numpy_kernel, queries, k1p1, lennorm, index.n_units, args.repeats
    )
    print(f"numpy : {numpy_time:.4f}s  ({args.queries / numpy_time:,.0f} queries/s)")
    if cython_kernel is None:
        print("cython: not built (pip install -e . compiles it)")
        return
    cython_time = time_kernel(
        cython_kernel, queries, k1p1, lennorm, index.n_units, args.repeats
    )
    print(f"cython: {cython_time:.4f}s  ({args.queries / cython_time:,.0f} queries/s)")
    print(f"speedup: {numpy_time / cython_time:.2f}x")


if __name__ == "__main__":
    main()
