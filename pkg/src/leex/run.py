"""Ranked runs: per-query scored unit lists plus normalization helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError


@dataclass(frozen=True)
class RunEntry:
    unit_id: str
    score: float
    stage_tag: str = ""


class ScoredRun:
    """Per-query ranked lists, kept sorted by (-score, unit_id)."""

    def __init__(self, name: str = "run"):
        self.name = name
        self._entries: dict[str, list[RunEntry]] = {}

    @property
    def qids(self) -> list[str]:
        return sorted(self._entries)

    def __contains__(self, qid: str) -> bool:
        return qid in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self, qid: str) -> list[RunEntry]:
        return self._entries.get(qid, [])

    def set_entries(self, qid: str, entries: list[RunEntry]) -> None:
        seen: set[str] = set()
        for e in entries:
            if e.unit_id in seen:
                raise ValidationError(f"duplicate unit {e.unit_id!r} for query {qid!r}")
            seen.add(e.unit_id)
        self._entries[qid] = sorted(entries, key=lambda e: (-e.score, e.unit_id))

    def top(self, qid: str, k: int) -> list[RunEntry]:
        return self.entries(qid)[:k]

    def truncated(self, depth: int) -> "ScoredRun":
        out = ScoredRun(self.name)
        for qid, entries in self._entries.items():
            out._entries[qid] = entries[:depth]
        return out


def max_normalize(entries: list[RunEntry]) -> list[tuple[str, float]]:
    """Scores divided by the list max, clamped to [0, 1].

    The canonical map from retrieval scores to feedback weights; an all-zero
    or negative-max list degenerates to uniform zeros.
    """
    if not entries:
        return []
    top = max(e.score for e in entries)
    if top <= 0.0:
        return [(e.unit_id, 0.0) for e in entries]
    return [(e.unit_id, min(1.0, max(0.0, e.score / top))) for e in entries]


def min_max_normalize(scores: dict[str, float]) -> dict[str, float]:
    """Affine rescale of a score table onto [0, 1].

    A constant table (max == min) maps everything to 1.0 so that a
    degenerate side of a score mixture neither dominates nor vanishes
    asymmetrically.
    """
    if not scores:
        return {}
    lo = min(scores.values())
    hi = max(scores.values())
    if hi == lo:
        return {k: 1.0 for k in scores}
    span = hi - lo
    return {k: (v - lo) / span for k, v in scores.items()}
