"""Inverted indexes over word or entity vocabularies and weighted BM25.

Word units are analyzed text; entity units are opaque entity-id tokens, one
per mention occurrence. Scoring is exhaustive over posting lists through a
compiled kernel when available, with a NumPy fallback selected at import.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .run import RunEntry

if os.environ.get("LEEX_FORCE_PY_KERNEL"):
    from . import _bm25_kernel_py as _kernel
else:
    try:
        from . import _bm25_kernel as _kernel  # type: ignore[attr-defined]
    except ImportError:
        from . import _bm25_kernel_py as _kernel

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4
WORD = "word"
ENTITY = "entity"

_MAGIC = "LEEX-INDEX"
_VERSION = 1


def kernel_name() -> str:
    """Which BM25 kernel this process is using ("cython" or "numpy")."""
    return _kernel.KERNEL_NAME


@dataclass(frozen=True)
class WeightedQuery:
    vocab_kind: str
    terms: tuple[tuple[str, float], ...]

    def __post_init__(self):
        seen: set[str] = set()
        positive = False
        for term, weight in self.terms:
            if term in seen:
                raise ValidationError(f"duplicate query term {term!r}")
            seen.add(term)
            if weight < 0:
                raise ValidationError(f"negative weight for term {term!r}")
            if weight > 0:
                positive = True
        if not positive:
            raise ValidationError("query needs at least one positive-weight term")

    def as_dict(self) -> dict[str, float]:
        return {t: w for t, w in self.terms}


class InvertedIndex:
    """Immutable term → (unit ordinal, tf) postings with unit statistics.

    Ordinals follow ascending unit_id, so ordinal order doubles as the
    ranking tie-break.
    """

    def __init__(
        self,
        vocab_kind: str,
        unit_ids: list[str],
        unit_lengths: np.ndarray,
        postings: dict[str, tuple[np.ndarray, np.ndarray]],
        total_tokens: int,
    ):
        self.vocab_kind = vocab_kind
        self.unit_ids = unit_ids
        self.unit_ord = {uid: i for i, uid in enumerate(unit_ids)}
        self.unit_lengths = unit_lengths
        self.postings = postings
        self.total_tokens = total_tokens
        self._lennorm_cache: dict[tuple[float, float], np.ndarray] = {}
        self._forward: list[dict[str, float]] | None = None

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @property
    def avg_length(self) -> float:
        return float(self.unit_lengths.mean()) if self.n_units else 0.0

    def __contains__(self, unit_id: str) -> bool:
        return unit_id in self.unit_ord

    def df(self, term: str) -> int:
        entry = self.postings.get(term)
        return len(entry[0]) if entry is not None else 0

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.n_units - df + 0.5) / (df + 0.5))

    def tf(self, term: str, unit_id: str) -> float:
        entry = self.postings.get(term)
        if entry is None:
            return 0.0
        ords, tfs = entry
        pos = int(np.searchsorted(ords, self.unit_ord[unit_id]))
        if pos < len(ords) and ords[pos] == self.unit_ord[unit_id]:
            return float(tfs[pos])
        return 0.0

    def length(self, unit_id: str) -> float:
        return float(self.unit_lengths[self.unit_ord[unit_id]])

    def unit_terms(self, unit_id: str) -> dict[str, float]:
        """Term frequencies of one unit, reconstructed from postings.

        Linear in vocabulary size; meant for tests and oracles, not hot paths.
        """
        ord_ = self.unit_ord[unit_id]
        out: dict[str, float] = {}
        for term, (ords, tfs) in self.postings.items():
            pos = int(np.searchsorted(ords, ord_))
            if pos < len(ords) and ords[pos] == ord_:
                out[term] = float(tfs[pos])
        return out

    def forward_vector(self, unit_id: str) -> dict[str, float]:
        """Term → tf for one unit, from a lazily built forward map.

        The first call inverts all postings at once; relevance-model
        construction hits many units per query, so per-unit scans would
        be quadratic.
        """
        if self._forward is None:
            forward: list[dict[str, float]] = [{} for _ in self.unit_ids]
            for term, (ords, tfs) in self.postings.items():
                for o, tf in zip(ords.tolist(), tfs.tolist()):
                    forward[o][term] = tf
            self._forward = forward
        return self._forward[self.unit_ord[unit_id]]

    def _lennorm(self, k1: float, b: float) -> np.ndarray:
        key = (k1, b)
        cached = self._lennorm_cache.get(key)
        if cached is None:
            avg = self.avg_length
            cached = k1 * (1.0 - b + b * (self.unit_lengths / avg))
            self._lennorm_cache[key] = cached
        return cached


def build_index(units: Iterable[tuple[str, list[str]]], vocab_kind: str) -> InvertedIndex:
    """Build an index from (unit_id, token list) pairs.

    Duplicate unit ids abort the build. Ordinals are assigned in sorted
    unit_id order, so the result is independent of input order.
    """
    if vocab_kind not in (WORD, ENTITY):
        raise ValidationError(f"unknown vocab_kind {vocab_kind!r}")
    counts: dict[str, dict[str, int]] = {}
    lengths: dict[str, int] = {}
    total = 0
    for unit_id, tokens in units:
        if unit_id in lengths:
            raise ValidationError(f"duplicate unit_id {unit_id!r} in index build")
        lengths[unit_id] = len(tokens)
        total += len(tokens)
        for tok in tokens:
            by_unit = counts.setdefault(tok, {})
            by_unit[unit_id] = by_unit.get(unit_id, 0) + 1

    unit_ids = sorted(lengths)
    ord_of = {uid: i for i, uid in enumerate(unit_ids)}
    unit_lengths = np.array([lengths[uid] for uid in unit_ids], dtype=np.float64)

    postings: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for term in sorted(counts):
        by_unit = counts[term]
        ords = np.array(sorted(ord_of[uid] for uid in by_unit), dtype=np.int32)
        tfs = np.array([by_unit[unit_ids[o]] for o in ords], dtype=np.float64)
        postings[term] = (ords, tfs)

    return InvertedIndex(vocab_kind, unit_ids, unit_lengths, postings, total)


def bm25_search(
    index: InvertedIndex,
    query: WeightedQuery,
    k: int = 1000,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    stage_tag: str = "bm25",
) -> list[RunEntry]:
    """Exhaustive weighted BM25 over the index; top-k, ties by unit_id."""
    if query.vocab_kind != index.vocab_kind:
        raise ValidationError(
            f"query vocab {query.vocab_kind!r} does not match index {index.vocab_kind!r}"
        )
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if not k1 > 0 or not 0.0 <= b <= 1.0:
        raise ValidationError(f"bad BM25 parameters k1={k1} b={b}")
    if index.n_units == 0:
        return []

    ords_parts: list[np.ndarray] = []
    tfs_parts: list[np.ndarray] = []
    weights: list[float] = []
    for term, weight in query.terms:
        entry = index.postings.get(term)
        if entry is None or weight <= 0.0:
            continue
        ords_parts.append(entry[0])
        tfs_parts.append(entry[1])
        weights.append(weight * index.idf(term))
    if not weights:
        return []

    starts = np.zeros(len(weights) + 1, dtype=np.int64)
    np.cumsum([len(p) for p in ords_parts], out=starts[1:])
    ords = np.concatenate(ords_parts)
    tfs = np.concatenate(tfs_parts)
    warr = np.array(weights, dtype=np.float64)
    scores = np.zeros(index.n_units, dtype=np.float64)
    _kernel.bm25_accumulate(ords, tfs, starts, warr, k1 + 1.0, index._lennorm(k1, b), scores)

    hit = np.unique(ords)
    order = np.argsort(-scores[hit], kind="stable")
    top = hit[order][:k]
    return [
        RunEntry(index.unit_ids[int(o)], float(scores[int(o)]), stage_tag) for o in top
    ]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Write the index as a directory; round-trips bit-exactly."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    terms = sorted(index.postings)
    offsets = np.zeros(len(terms) + 1, dtype=np.int64)
    if terms:
        sizes = [len(index.postings[t][0]) for t in terms]
        np.cumsum(sizes, out=offsets[1:])
        ords = np.concatenate([index.postings[t][0] for t in terms])
        tfs = np.concatenate([index.postings[t][1] for t in terms])
    else:
        ords = np.zeros(0, dtype=np.int32)
        tfs = np.zeros(0, dtype=np.float64)

    meta = {
        "magic": _MAGIC,
        "version": _VERSION,
        "vocab_kind": index.vocab_kind,
        "n_units": index.n_units,
        "total_tokens": index.total_tokens,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=1), encoding="utf-8")
    (path / "units.json").write_text(json.dumps(index.unit_ids), encoding="utf-8")
    (path / "terms.json").write_text(json.dumps(terms), encoding="utf-8")
    np.save(path / "lengths.npy", index.unit_lengths)
    np.save(path / "offsets.npy", offsets)
    np.save(path / "ords.npy", ords)
    np.save(path / "tfs.npy", tfs)


def load_index(path: str | Path) -> InvertedIndex:
    path = Path(path)
    meta_file = path / "meta.json"
    if not meta_file.is_file():
        raise ValidationError(f"{path}: not an index directory (missing meta.json)")
    meta = json.loads(meta_file.read_text(encoding="utf-8"))
    if meta.get("magic") != _MAGIC:
        raise ValidationError(f"{path}: bad index magic {meta.get('magic')!r}")
    if meta.get("version") != _VERSION:
        raise ValidationError(f"{path}: unsupported index version {meta.get('version')!r}")

    unit_ids = json.loads((path / "units.json").read_text(encoding="utf-8"))
    terms = json.loads((path / "terms.json").read_text(encoding="utf-8"))
    unit_lengths = np.load(path / "lengths.npy")
    offsets = np.load(path / "offsets.npy")
    ords = np.load(path / "ords.npy")
    tfs = np.load(path / "tfs.npy")

    postings: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for i, term in enumerate(terms):
        lo, hi = int(offsets[i]), int(offsets[i + 1])
        postings[term] = (ords[lo:hi], tfs[lo:hi])
    return InvertedIndex(
        meta["vocab_kind"], unit_ids, unit_lengths, postings, int(meta["total_tokens"])
    )
