"""Neural-style re-ranking: passage scoring, max-passage doc aggregation.

Documents below the re-rank depth stay in their original order but have
their scores squashed rank-preservingly into (-2, -1), below anything a
scorer can emit, while keeping their original stage tags.
"""

from __future__ import annotations

from .corpus import Corpus
from .errors import ScorerError, ValidationError
from .run import RunEntry, ScoredRun
from .scorers import DEFAULT_BATCH_SIZE, Scorer, validate_scores


class PassageScoreTable:
    """Per-query passage scores in scoring order; the feedback source."""

    def __init__(self):
        self._scores: dict[str, dict[str, float]] = {}
        self._doc_order: dict[str, list[str]] = {}

    def add(self, qid: str, doc_id: str, passage_scores: dict[str, float]) -> None:
        table = self._scores.setdefault(qid, {})
        order = self._doc_order.setdefault(qid, [])
        if doc_id not in order:
            order.append(doc_id)
        table.update(passage_scores)

    def passages(self, qid: str) -> dict[str, float]:
        return self._scores.get(qid, {})

    def scored_docs(self, qid: str) -> list[str]:
        """Doc ids in first-scored order."""
        return list(self._doc_order.get(qid, []))

    @property
    def qids(self) -> list[str]:
        return sorted(self._scores)

    def merge(self, other: "PassageScoreTable") -> None:
        for qid, table in other._scores.items():
            self._scores.setdefault(qid, {}).update(table)
            order = self._doc_order.setdefault(qid, [])
            for doc_id in other._doc_order.get(qid, []):
                if doc_id not in order:
                    order.append(doc_id)


def score_documents(
    qid: str,
    query_text: str,
    doc_ids: list[str],
    corpus: Corpus,
    scorer: Scorer,
    table: PassageScoreTable,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> dict[str, float]:
    """Score every passage of each document; return max-passage doc scores.

    Batches span document boundaries so short documents don't waste scorer
    round trips. Passage scores land in `table`; a document with no
    passages scores 0 and contributes none.
    """
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")
    pending: list[tuple[str, str, str]] = []  # (doc_id, pid, text)
    for doc_id in doc_ids:
        if doc_id not in corpus:
            raise ValidationError(f"query {qid}: doc {doc_id!r} not in corpus")
        for passage in corpus.passages(doc_id):
            pending.append((doc_id, passage.passage_id, corpus.scoring_text(passage)))

    doc_scores: dict[str, float] = {d: 0.0 for d in doc_ids}
    per_doc: dict[str, dict[str, float]] = {d: {} for d in doc_ids}
    for batch_idx in range(0, len(pending), batch_size):
        batch = pending[batch_idx : batch_idx + batch_size]
        context = f"query {qid}, batch {batch_idx // batch_size}"
        try:
            raw = scorer.score_batch(qid, query_text, [(pid, text) for _d, pid, text in batch])
        except ScorerError:
            raise
        except Exception as exc:
            raise ScorerError(f"{context}: scorer raised {exc!r}") from exc
        scores = validate_scores(raw, len(batch), context)
        for (doc_id, pid, _text), score in zip(batch, scores):
            per_doc[doc_id][pid] = score

    for doc_id in doc_ids:
        if per_doc[doc_id]:
            doc_scores[doc_id] = max(per_doc[doc_id].values())
        table.add(qid, doc_id, per_doc[doc_id])
    return doc_scores


def rerank_run(
    run: ScoredRun,
    corpus: Corpus,
    scorer: Scorer,
    depth: int,
    queries: dict[str, str],
    batch_size: int = DEFAULT_BATCH_SIZE,
    stage_tag: str | None = None,
) -> tuple[ScoredRun, PassageScoreTable]:
    """Re-score the top-`depth` of each query's list by max-passage.

    The document set never changes: below-depth entries are appended after
    the re-scored block, original order and stage tags intact, scores
    squashed into (-2, -1).
    """
    if depth < 0:
        raise ValidationError(f"depth must be >= 0, got {depth}")
    tag = stage_tag if stage_tag is not None else f"rerank:{scorer.name}"
    out = ScoredRun(f"{run.name}+{tag}")
    table = PassageScoreTable()
    for qid in run.qids:
        entries = run.entries(qid)
        if depth == 0:
            out.set_entries(qid, list(entries))
            continue
        head = entries[:depth]
        tail = entries[depth:]
        query_text = queries.get(qid)
        if query_text is None:
            raise ValidationError(f"no query text for qid {qid!r}")
        doc_scores = score_documents(
            qid, query_text, [e.unit_id for e in head], corpus, scorer, table, batch_size
        )
        rescored = [RunEntry(d, s, tag) for d, s in doc_scores.items()]
        squashed = [
            RunEntry(e.unit_id, -1.0 - (j + 1) / (len(tail) + 1), e.stage_tag)
            for j, e in enumerate(tail)
        ]
        out.set_entries(qid, rescored + squashed)
    return out, table
