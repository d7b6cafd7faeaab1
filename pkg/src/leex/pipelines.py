"""The three retrieval pipelines: traditional expansion, expansion from
neural feedback (with optional second re-rank), and adaptive expansion.

Each stage emits a TREC run file tagged with the stage name and the
resolved config hash; a stats line per query reports how many unique
documents the scorer saw.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .adaptive import adaptive_expand
from .analysis import analyze_text
from .config import PipelineConfig
from .corpus import Corpus, Query
from .errors import ConfigError, DegenerateModelError
from .expand import (
    DOCUMENT,
    PASSAGE,
    ExpansionConfig,
    FeedbackSet,
    build_feedback,
    duet_retrieve,
    entity_relevance_model,
    make_expanded_query,
    word_relevance_model,
)
from .index import WORD, WeightedQuery, bm25_search
from .indexset import IndexSet
from .rerank import PassageScoreTable, rerank_run
from .run import RunEntry, ScoredRun, max_normalize
from .scorers import IdentityScorer, Scorer, make_scorer
from .trec import read_qrels, write_run

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    stages: list[tuple[str, ScoredRun]]
    stats: list[dict]
    config_hash: str
    run_paths: list[Path] = field(default_factory=list)
    stats_path: Path | None = None

    @property
    def final_run(self) -> ScoredRun:
        return self.stages[-1][1]


def uniform_word_query(query: Query) -> WeightedQuery | None:
    terms = sorted(set(analyze_text(query.text)))
    if not terms:
        return None
    w = 1.0 / len(terms)
    return WeightedQuery(WORD, tuple((t, w) for t in terms))


def initial_retrieval(
    topics: list[Query], indexes: IndexSet, config: PipelineConfig
) -> ScoredRun:
    run = ScoredRun("bm25")
    for query in topics:
        wq = uniform_word_query(query)
        if wq is None:
            log.warning("query %s has no indexable terms; skipped", query.query_id)
            continue
        entries = bm25_search(
            indexes.doc_words, wq, k=config.run_depth, k1=config.k1, b=config.b
        )
        run.set_entries(query.query_id, entries)
    return run


def scorer_for(config: PipelineConfig, prior: ScoredRun) -> Scorer:
    qrels = read_qrels(config.qrels) if config.qrels else None
    return make_scorer(
        config.scorer,
        qrels=qrels,
        prior_run=prior,
        timeout=config.timeout,
        retries=config.retries,
    )


def feedback_from_run_entries(
    entries: list[RunEntry], fb_docs: int, source_stage: str, normalized: bool
) -> FeedbackSet:
    """Document-unit feedback from a ranked list.

    Raw retrieval scores get max-normalized first; re-ranked scores are
    already calibrated, and the squashed below-depth tail is excluded.
    """
    if normalized:
        candidates = [(e.unit_id, e.score) for e in entries if e.score >= 0.0]
    else:
        candidates = max_normalize(entries)
    return build_feedback(candidates, fb_docs, DOCUMENT, source_stage)


def feedback_from_passages(
    table: PassageScoreTable, qid: str, fb_docs: int, source_stage: str
) -> FeedbackSet:
    return build_feedback(
        list(table.passages(qid).items()), fb_docs, PASSAGE, source_stage
    )


@dataclass
class DuetQueries:
    word: WeightedQuery
    entity: WeightedQuery | None
    word_fallback: bool = False


def expansion_queries(
    query: Query,
    feedback: FeedbackSet,
    indexes: IndexSet,
    exp: ExpansionConfig,
) -> DuetQueries:
    """Build the word and entity expanded queries for one topic.

    A degenerate word model falls back to the plain query; a degenerate
    entity side is simply absent (the duet then runs word-only).
    """
    if feedback.unit_kind == PASSAGE:
        word_index, entity_index = indexes.passage_words, indexes.passage_entities
    else:
        word_index, entity_index = indexes.doc_words, indexes.doc_entities

    word_fallback = False
    try:
        word_model = word_relevance_model(feedback, word_index, exp)
        word_query = make_expanded_query(query, word_model, exp.original_query_weight)
    except DegenerateModelError:
        fallback_query = uniform_word_query(query)
        if fallback_query is None:
            raise
        log.warning("query %s: degenerate word model; using plain query", query.query_id)
        word_query = fallback_query
        word_fallback = True

    entity_query: WeightedQuery | None = None
    try:
        entity_model = entity_relevance_model(feedback, entity_index, exp)
        entity_query = make_expanded_query(query, entity_model, exp.original_query_weight)
    except DegenerateModelError:
        entity_query = None
    return DuetQueries(word_query, entity_query, word_fallback)


def run_pipeline(
    config: PipelineConfig,
    corpus: Corpus,
    indexes: IndexSet,
    topics: list[Query],
    output_dir: str | Path | None = None,
) -> PipelineResult:
    """Execute the configured pipeline over all topics.

    traditional: BM25 → expand → duet BM25 → rerank.
    nlm-feedback: BM25 → rerank → expand → duet BM25 (emitted).
    nlm-feedback-rerank: the same plus a second rerank.
    adaptive: BM25 → alternating batch scoring with frontier refreshes.
    """
    topic_map = {q.query_id: q for q in topics}
    query_texts = {q.query_id: q.text for q in topics}
    chash = config.config_hash
    exp = config.expansion

    stages: list[tuple[str, ScoredRun]] = []
    stats: list[dict] = []

    r0 = initial_retrieval(topics, indexes, config)
    stages.append(("bm25", r0))

    if config.pipeline == "adaptive":
        final = ScoredRun("adaptive")
        scorer = scorer_for(config, r0)
        try:
            for qid in r0.qids:
                entries, qstats, _table = adaptive_expand(
                    qid,
                    topic_map[qid],
                    r0.entries(qid),
                    corpus,
                    scorer,
                    indexes,
                    exp,
                    budget=config.budget,
                    batch=config.batch,
                    k1=config.k1,
                    b=config.b,
                    batch_size=config.batch_size,
                    frontier_mode=config.frontier_mode,
                    gar_n_terms=config.gar_n_terms,
                    frontier_depth=config.run_depth,
                )
                final.set_entries(qid, entries)
                stats.append(json.loads(qstats.to_json()))
        finally:
            scorer.close()
        stages.append(("adaptive", final))
        return _emit(config, stages, stats, chash, output_dir)

    scored_docs: dict[str, set[str]] = {qid: set() for qid in r0.qids}
    fallbacks: dict[str, int] = {qid: 0 for qid in r0.qids}

    if config.pipeline == "traditional":
        feedback_run, table = r0, None
    else:
        scorer = scorer_for(config, r0)
        try:
            reranked, table = rerank_run(
                r0, corpus, scorer, config.depth, query_texts, config.batch_size
            )
        finally:
            scorer.close()
        stages.append(("rerank-feedback", reranked))
        for qid in reranked.qids:
            scored_docs[qid].update(table.scored_docs(qid))
        feedback_run = reranked

    duet_run = ScoredRun("duet")
    for qid in feedback_run.qids:
        if config.pipeline == "traditional" or exp.unit_kind == DOCUMENT:
            feedback = feedback_from_run_entries(
                feedback_run.entries(qid),
                exp.fb_docs,
                feedback_run.name,
                normalized=config.pipeline != "traditional",
            )
        else:
            assert table is not None
            feedback = feedback_from_passages(table, qid, exp.fb_docs, feedback_run.name)
        queries = expansion_queries(topic_map[qid], feedback, indexes, exp)
        duet = duet_retrieve(
            queries.word,
            queries.entity,
            indexes.doc_words,
            indexes.doc_entities,
            exp.lambda_,
            exp.k_lee,
            run_depth=config.run_depth,
            k1=config.k1,
            b=config.b,
        )
        duet_run.set_entries(qid, duet.entries)
        fallbacks[qid] += int(queries.word_fallback) + int(duet.entity_fallback)
    stages.append(("duet", duet_run))

    if config.pipeline in ("traditional", "nlm-feedback-rerank"):
        scorer = scorer_for(config, duet_run)
        try:
            final, table2 = rerank_run(
                duet_run, corpus, scorer, config.depth, query_texts, config.batch_size
            )
        finally:
            scorer.close()
        stages.append(("rerank-final", final))
        for qid in final.qids:
            scored_docs[qid].update(table2.scored_docs(qid))

    for qid in sorted(scored_docs):
        stats.append(
            {
                "qid": qid,
                "unique_scored": len(scored_docs[qid]),
                "fallbacks": fallbacks[qid],
            }
        )
    return _emit(config, stages, stats, chash, output_dir)


def _emit(
    config: PipelineConfig,
    stages: list[tuple[str, ScoredRun]],
    stats: list[dict],
    chash: str,
    output_dir: str | Path | None,
) -> PipelineResult:
    result = PipelineResult(stages, stats, chash)
    if output_dir is None:
        return result
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, (stage, run) in enumerate(stages):
        path = out / f"{i:02d}-{stage}.run"
        write_run(run, path, tag=stage, config_hash=chash)
        result.run_paths.append(path)
    result.stats_path = out / "stats.jsonl"
    with result.stats_path.open("w", encoding="utf-8") as fh:
        for row in stats:
            fh.write(json.dumps(row) + "\n")
    return result
