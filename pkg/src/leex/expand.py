"""Relevance-model query expansion over words and entities, plus duet fusion.

The word model weights each feedback term by feedback probability times
length-normalized frequency, optionally times IDF (the score-weighted
relevance-model family with or without the collection factor). The entity
model mixes that unigram form with a co-occurrence dependence term built
from entity pairs. Word and entity expanded queries retrieve separately
and fuse by interpolation of min-max normalized scores.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .analysis import analyze_text
from .corpus import Query
from .errors import DegenerateModelError, ValidationError
from .index import ENTITY, WORD, InvertedIndex, WeightedQuery, bm25_search
from .run import RunEntry, min_max_normalize

log = logging.getLogger(__name__)

DOCUMENT = "document"
PASSAGE = "passage"
RUN_DEPTH = 1000
K_LEE_GRID = (1000, 2000, 3000, 4000)


@dataclass(frozen=True)
class ExpansionConfig:
    fb_docs: int = 10
    fb_terms: int = 10
    original_query_weight: float = 0.5
    beta: float = 0.5
    lambda_: float = 0.5
    k_lee: int = 1000
    unit_kind: str = DOCUMENT
    use_idf_factor: bool = True
    use_entity_pairs: bool = True

    def __post_init__(self):
        if self.fb_docs < 1 or self.fb_terms < 1:
            raise ValidationError("fb_docs and fb_terms must be >= 1")
        for name in ("original_query_weight", "beta", "lambda_"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValidationError(f"{name} must be in [0,1], got {val}")
        if self.k_lee < 1:
            raise ValidationError(f"k_lee must be >= 1, got {self.k_lee}")


@dataclass(frozen=True)
class FeedbackSet:
    unit_kind: str
    entries: tuple[tuple[str, float], ...]
    source_stage: str = ""
    degenerate: bool = False

    def units(self) -> list[str]:
        return [uid for uid, _p in self.entries]


@dataclass(frozen=True)
class RelevanceModel:
    vocab_kind: str
    weights: dict[str, float]
    mode: str


def build_feedback(
    scored: list[tuple[str, float]],
    fb_docs: int,
    unit_kind: str,
    source_stage: str = "",
) -> FeedbackSet:
    """Top fb_docs units by score, with scores sum-normalized into p(Q|D).

    Scores must already sit in [0, 1]. An all-zero top block falls back to
    a uniform distribution and flags the set degenerate.
    """
    if fb_docs < 1:
        raise ValidationError(f"fb_docs must be >= 1, got {fb_docs}")
    if not scored:
        raise ValidationError("empty feedback candidate list")
    for uid, score in scored:
        if not -1e-9 <= score <= 1.0 + 1e-9:
            raise ValidationError(f"feedback score for {uid!r} outside [0,1]: {score}")
    top = sorted(scored, key=lambda kv: (-kv[1], kv[0]))[:fb_docs]
    total = sum(s for _u, s in top)
    if total <= 0.0:
        p = 1.0 / len(top)
        return FeedbackSet(unit_kind, tuple((u, p) for u, _s in top), source_stage, True)
    return FeedbackSet(
        unit_kind, tuple((u, s / total) for u, s in top), source_stage, False
    )


def _unit_weight_sums(
    feedback: FeedbackSet, index: InvertedIndex
) -> tuple[dict[str, float], dict[str, set[str]]]:
    """p-weighted length-normalized term frequency sums over feedback units.

    Returns (term → Σ_D p(D)·tf(t,D)/len(D), term → set of units containing
    it). Zero-length units contribute nothing.
    """
    sums: dict[str, float] = {}
    homes: dict[str, set[str]] = {}
    for unit_id, p in feedback.entries:
        if unit_id not in index:
            raise ValidationError(f"feedback unit {unit_id!r} missing from index")
        length = index.length(unit_id)
        if length <= 0:
            continue
        for term, tf in index.forward_vector(unit_id).items():
            sums[term] = sums.get(term, 0.0) + p * (tf / length)
            homes.setdefault(term, set()).add(unit_id)
    return sums, homes


def _truncate_normalize(
    weights: dict[str, float], fb_terms: int, vocab_kind: str, mode: str
) -> RelevanceModel:
    positive = {t: w for t, w in weights.items() if w > 0.0}
    if not positive:
        raise DegenerateModelError(f"empty {vocab_kind} vocabulary in feedback units")
    ranked = sorted(positive.items(), key=lambda kv: (-kv[1], kv[0]))[:fb_terms]
    total = sum(w for _t, w in ranked)
    return RelevanceModel(vocab_kind, {t: w / total for t, w in ranked}, mode)


def word_relevance_model(
    feedback: FeedbackSet, index: InvertedIndex, config: ExpansionConfig
) -> RelevanceModel:
    """Feedback term distribution, optionally IDF-weighted.

    weight(w) = Σ_D p(Q|D) · tf(w,D)/len(D) · idf(w)^[use_idf_factor],
    truncated to fb_terms (ties by ascending term) and renormalized.
    """
    sums, _homes = _unit_weight_sums(feedback, index)
    if config.use_idf_factor:
        weights = {t: s * index.idf(t) for t, s in sums.items()}
        mode = "lce"
    else:
        weights = sums
        mode = "rm3"
    return _truncate_normalize(weights, config.fb_terms, index.vocab_kind, mode)


def entity_pair_model(
    feedback: FeedbackSet, entity_index: InvertedIndex, config: ExpansionConfig
) -> dict[tuple[str, str], float]:
    """Dependence weight for each entity pair co-occurring in feedback.

    P([e1,e2]|R) = Σ_D p(Q|D) · (freq(e1,D)+freq(e2,D))/len(D) · idf(e1)·idf(e2)
    over all feedback units, which factorizes through per-entity sums; only
    pairs sharing at least one unit appear in the table.
    """
    if entity_index.vocab_kind != ENTITY:
        raise ValidationError("entity_pair_model needs an entity index")
    sums, homes = _unit_weight_sums(feedback, entity_index)

    cooccur: set[tuple[str, str]] = set()
    by_unit: dict[str, list[str]] = {}
    for ent, units in homes.items():
        for u in units:
            by_unit.setdefault(u, []).append(ent)
    for ents in by_unit.values():
        ents.sort()
        for i in range(len(ents)):
            for j in range(i + 1, len(ents)):
                cooccur.add((ents[i], ents[j]))

    idf = {e: entity_index.idf(e) for e in sums}
    return {
        (a, b): (sums[a] + sums[b]) * idf[a] * idf[b] for a, b in sorted(cooccur)
    }


def entity_relevance_model(
    feedback: FeedbackSet, entity_index: InvertedIndex, config: ExpansionConfig
) -> RelevanceModel:
    """β-mixture of pair dependence sums and the entity unigram model.

    weight(e) = β · Σ_{e_i} P([e,e_i]|R) + (1−β) · unigram(e), with the
    unigram following the word-model form over entity tokens.
    """
    sums, _homes = _unit_weight_sums(feedback, entity_index)
    if config.use_idf_factor:
        unigram = {e: s * entity_index.idf(e) for e, s in sums.items()}
    else:
        unigram = dict(sums)

    beta = config.beta if config.use_entity_pairs else 0.0
    pair_sums: dict[str, float] = {}
    if beta > 0.0:
        for (a, b), w in entity_pair_model(feedback, entity_index, config).items():
            pair_sums[a] = pair_sums.get(a, 0.0) + w
            pair_sums[b] = pair_sums.get(b, 0.0) + w

    weights = {
        e: beta * pair_sums.get(e, 0.0) + (1.0 - beta) * unigram.get(e, 0.0)
        for e in set(unigram) | set(pair_sums)
    }
    return _truncate_normalize(weights, config.fb_terms, ENTITY, "lee-entity")


def make_expanded_query(
    original: Query, model: RelevanceModel, original_query_weight: float
) -> WeightedQuery:
    """Interpolate the original query distribution with the model.

    The original query becomes uniform over its unique analyzed terms (or
    its entity ids for an entity model); weight(t) = w0·p_orig(t) +
    (1−w0)·model(t). Exact at both endpoints.
    """
    w0 = original_query_weight
    if not 0.0 <= w0 <= 1.0:
        raise ValidationError(f"original_query_weight must be in [0,1], got {w0}")
    if model.vocab_kind == ENTITY:
        orig_terms = sorted(set(original.entity_ids))
    else:
        orig_terms = sorted(set(analyze_text(original.text)))
    if not orig_terms and w0 > 0.0:
        log.warning(
            "query %s has no %s terms; ignoring original_query_weight",
            original.query_id,
            model.vocab_kind,
        )
        w0 = 0.0

    if w0 == 1.0:
        p = 1.0 / len(orig_terms)
        return WeightedQuery(model.vocab_kind, tuple((t, p) for t in orig_terms))
    if w0 == 0.0:
        return WeightedQuery(model.vocab_kind, tuple(model.weights.items()))

    p_orig = 1.0 / len(orig_terms)
    terms: dict[str, float] = {t: w0 * p_orig for t in orig_terms}
    for t, w in model.weights.items():
        terms[t] = terms.get(t, 0.0) + (1.0 - w0) * w
    ranked = sorted(terms.items(), key=lambda kv: (-kv[1], kv[0]))
    return WeightedQuery(model.vocab_kind, tuple(ranked))


@dataclass
class DuetResult:
    entries: list[RunEntry]
    entity_fallback: bool = False


def duet_retrieve(
    word_query: WeightedQuery,
    entity_query: WeightedQuery | None,
    word_index: InvertedIndex,
    entity_index: InvertedIndex | None,
    lambda_: float,
    k_lee: int,
    run_depth: int = RUN_DEPTH,
    k1: float = 0.9,
    b: float = 0.4,
    stage_tag: str = "duet",
) -> DuetResult:
    """Run both expanded queries, fuse min-max normalized scores by λ.

    A document absent from one side contributes 0 there. λ endpoints
    restrict candidates to the surviving side so the ordering equals that
    side's BM25 run exactly. A missing entity side degrades to word-only
    retrieval with a fallback flag.
    """
    if not 0.0 <= lambda_ <= 1.0:
        raise ValidationError(f"lambda must be in [0,1], got {lambda_}")
    if k_lee < run_depth:
        raise ValidationError(f"k_lee {k_lee} below run depth {run_depth}")

    fallback = entity_query is None or entity_index is None
    lam = 1.0 if fallback else lambda_
    if fallback:
        log.info("entity side unavailable; duet degrades to word-only retrieval")

    word_hits = bm25_search(word_index, word_query, k=k_lee, k1=k1, b=b)
    if lam == 1.0:
        fused = min_max_normalize({e.unit_id: e.score for e in word_hits})
    else:
        assert entity_query is not None and entity_index is not None
        entity_hits = bm25_search(entity_index, entity_query, k=k_lee, k1=k1, b=b)
        entity_norm = min_max_normalize({e.unit_id: e.score for e in entity_hits})
        if lam == 0.0:
            fused = entity_norm
        else:
            word_norm = min_max_normalize({e.unit_id: e.score for e in word_hits})
            fused = {
                d: lam * word_norm.get(d, 0.0) + (1.0 - lam) * entity_norm.get(d, 0.0)
                for d in set(word_norm) | set(entity_norm)
            }

    ranked = sorted(fused.items(), key=lambda kv: (-kv[1], kv[0]))[:run_depth]
    return DuetResult(
        [RunEntry(d, s, stage_tag) for d, s in ranked], entity_fallback=fallback
    )


# ---------------------------------------------------------------------------
# Expanded-query serialization
# ---------------------------------------------------------------------------


def write_weighted_query(path, query: WeightedQuery, config_hash: str = "") -> None:
    lines = [f"# vocab_kind={query.vocab_kind}\tconfig_hash={config_hash}"]
    for term, weight in query.terms:
        lines.append(f"{term}\t{weight!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_weighted_query(path) -> WeightedQuery:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# vocab_kind="):
            raise ValidationError(f"{path}: missing expanded-query header")
        vocab_kind = header.split("=", 1)[1].split("\t", 1)[0]
        terms: list[tuple[str, float]] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            try:
                term, weight = line.split("\t")
                terms.append((term, float(weight)))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad query line {line!r}") from None
    return WeightedQuery(vocab_kind, tuple(terms))
