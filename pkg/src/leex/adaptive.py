"""Adaptive expansion: alternate scoring batches between the initial pool
and a frontier refreshed from an expansion retrieval over everything
scored so far. A GAR-style variant refreshes the frontier from the best
newly scored document's own terms instead.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .corpus import Corpus, Query
from .errors import DegenerateModelError, ValidationError
from .expand import (
    PASSAGE,
    ExpansionConfig,
    FeedbackSet,
    RUN_DEPTH,
    duet_retrieve,
    entity_relevance_model,
    make_expanded_query,
    word_relevance_model,
)
from .index import ENTITY, WORD, WeightedQuery, bm25_search
from .indexset import IndexSet
from .rerank import PassageScoreTable, score_documents
from .run import RunEntry
from .scorers import DEFAULT_BATCH_SIZE, Scorer

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 1000
DEFAULT_BATCH = 16

LEE = "lee"
GAR_BM25 = "gar-bm25"
GAR_ENTITY = "gar-entity"


@dataclass
class AdaptiveStats:
    qid: str
    unique_scored: int = 0
    batches: int = 0
    frontier_refreshes: int = 0
    fallbacks: int = 0
    frontier_unscored: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "qid": self.qid,
                "unique_scored": self.unique_scored,
                "batches": self.batches,
                "frontier_refreshes": self.frontier_refreshes,
                "fallbacks": self.fallbacks,
                "frontier_unscored": self.frontier_unscored,
            }
        )


def gar_frontier_query(
    doc_id: str, indexes: IndexSet, mode: str, n_terms: int = 10
) -> WeightedQuery | None:
    """Turn one document into a uniform-weight frontier query.

    bm25-terms mode takes the doc's top n_terms by tf·idf; entity-terms
    mode takes its entity ids by mention frequency. A document with
    nothing usable yields None and the frontier contribution is skipped.
    """
    if mode == GAR_BM25:
        index = indexes.doc_words
        vec = index.forward_vector(doc_id)
        ranked = sorted(
            vec.items(), key=lambda kv: (-kv[1] * index.idf(kv[0]), kv[0])
        )[:n_terms]
        vocab = WORD
    elif mode == GAR_ENTITY:
        index = indexes.doc_entities
        vec = index.forward_vector(doc_id)
        ranked = sorted(vec.items(), key=lambda kv: (-kv[1], kv[0]))[:n_terms]
        vocab = ENTITY
    else:
        raise ValidationError(f"unknown frontier mode {mode!r}")
    if not ranked:
        return None
    weight = 1.0 / len(ranked)
    return WeightedQuery(vocab, tuple((t, weight) for t, _tf in ranked))


def _passage_feedback(
    doc_scores: list[tuple[str, float]], corpus: Corpus
) -> FeedbackSet:
    """Passage-unit feedback carrying each parent document's score."""
    entries = [
        (p.passage_id, score)
        for doc_id, score in doc_scores
        for p in corpus.passages(doc_id)
    ]
    if not entries:
        raise DegenerateModelError("feedback documents have no passages")
    total = sum(s for _pid, s in entries)
    if total <= 0.0:
        p = 1.0 / len(entries)
        return FeedbackSet(PASSAGE, tuple((pid, p) for pid, _s in entries), "adaptive", True)
    return FeedbackSet(
        PASSAGE, tuple((pid, s / total) for pid, s in entries), "adaptive", False
    )


def _lee_frontier(
    query: Query,
    scored: dict[str, float],
    corpus: Corpus,
    indexes: IndexSet,
    config: ExpansionConfig,
    stats: AdaptiveStats,
    k1: float,
    b: float,
    frontier_depth: int,
) -> list[str]:
    """Rebuild the duet query from all scored docs; return unscored ranking."""
    top_docs = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))[: config.fb_docs]
    try:
        feedback = _passage_feedback(top_docs, corpus)
        word_model = word_relevance_model(feedback, indexes.passage_words, config)
        word_query = make_expanded_query(query, word_model, config.original_query_weight)
    except DegenerateModelError:
        stats.fallbacks += 1
        return []

    entity_query: WeightedQuery | None = None
    try:
        entity_model = entity_relevance_model(feedback, indexes.passage_entities, config)
        entity_query = make_expanded_query(query, entity_model, config.original_query_weight)
    except (DegenerateModelError, ValidationError):
        entity_query = None

    duet = duet_retrieve(
        word_query,
        entity_query,
        indexes.doc_words,
        indexes.doc_entities,
        config.lambda_,
        config.k_lee,
        run_depth=frontier_depth,
        k1=k1,
        b=b,
    )
    stats.frontier_refreshes += 1
    if duet.entity_fallback:
        stats.fallbacks += 1
    return [e.unit_id for e in duet.entries if e.unit_id not in scored]


def _gar_frontier(
    last_batch: list[str],
    scored: dict[str, float],
    indexes: IndexSet,
    mode: str,
    stats: AdaptiveStats,
    k1: float,
    b: float,
    frontier_depth: int,
    n_terms: int,
) -> list[str]:
    """Frontier from the single best document of the last scored batch."""
    if not last_batch:
        return []
    best = min(last_batch, key=lambda d: (-scored[d], d))
    fq = gar_frontier_query(best, indexes, mode, n_terms)
    if fq is None:
        stats.fallbacks += 1
        return []
    index = indexes.doc_words if mode == GAR_BM25 else indexes.doc_entities
    hits = bm25_search(index, fq, k=frontier_depth, k1=k1, b=b)
    stats.frontier_refreshes += 1
    return [e.unit_id for e in hits if e.unit_id not in scored]


def adaptive_expand(
    qid: str,
    query: Query,
    r0: list[RunEntry],
    corpus: Corpus,
    scorer: Scorer,
    indexes: IndexSet,
    config: ExpansionConfig,
    budget: int = DEFAULT_BUDGET,
    batch: int = DEFAULT_BATCH,
    k1: float = 0.9,
    b: float = 0.4,
    batch_size: int = DEFAULT_BATCH_SIZE,
    frontier_mode: str = LEE,
    gar_n_terms: int = 10,
    frontier_depth: int = RUN_DEPTH,
) -> tuple[list[RunEntry], AdaptiveStats, PassageScoreTable]:
    """Score up to `budget` docs, alternating initial pool and frontier.

    Per round: (a) a batch from the initial run, (b) a frontier refresh
    from all scored docs, (c) a batch from the frontier. A dry pool passes
    its leftover budget to the other; the loop stops when a full round
    scores nothing. The final run is every scored doc by descending score.
    """
    if not r0:
        raise ValidationError(f"query {qid}: empty initial run")
    if batch < 1 or budget < batch:
        raise ValidationError(f"need budget >= batch >= 1, got {budget}, {batch}")

    scored: dict[str, float] = {}
    table = PassageScoreTable()
    stats = AdaptiveStats(qid=qid)
    pool = [e.unit_id for e in r0]
    pool_pos = 0
    frontier: list[str] = []
    budget_left = budget
    last_batch: list[str] = []

    def next_from_pool(n: int) -> list[str]:
        nonlocal pool_pos
        out: list[str] = []
        while pool_pos < len(pool) and len(out) < n:
            doc = pool[pool_pos]
            pool_pos += 1
            if doc not in scored:
                out.append(doc)
        return out

    def next_from_frontier(n: int) -> list[str]:
        out: list[str] = []
        while frontier and len(out) < n:
            doc = frontier.pop(0)
            if doc not in scored:
                out.append(doc)
        return out

    def score_batch_of(doc_ids: list[str]) -> None:
        nonlocal budget_left
        doc_scores = score_documents(
            qid, query.text, doc_ids, corpus, scorer, table, batch_size
        )
        scored.update(doc_scores)
        stats.batches += 1
        budget_left -= len(doc_ids)

    while budget_left > 0:
        before = len(scored)
        batch_a = next_from_pool(min(batch, budget_left))
        if batch_a:
            score_batch_of(batch_a)
            last_batch = batch_a
        if budget_left <= 0:
            break
        if scored:
            if frontier_mode == LEE:
                frontier = _lee_frontier(
                    query, scored, corpus, indexes, config, stats, k1, b, frontier_depth
                )
            else:
                frontier = _gar_frontier(
                    last_batch, scored, indexes, frontier_mode, stats,
                    k1, b, frontier_depth, gar_n_terms,
                )
        batch_c = next_from_frontier(min(batch, budget_left))
        if batch_c:
            score_batch_of(batch_c)
            last_batch = batch_c
        if len(scored) == before:
            break

    stats.unique_scored = len(scored)
    stats.frontier_unscored = sum(1 for d in frontier if d not in scored)
    entries = [
        RunEntry(d, s, "adaptive")
        for d, s in sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))[:budget]
    ]
    return entries, stats, table
