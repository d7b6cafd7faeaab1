"""The four indexes a pipeline needs: docs and passages, words and entities.

Word tokens come from analysis (documents index title plus body, passages
index their own text only); entity tokens are one opaque id per mention.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .analysis import analyze_text
from .corpus import Corpus
from .index import ENTITY, WORD, InvertedIndex, build_index, load_index, save_index

SUBDIRS = ("doc_words", "doc_entities", "passage_words", "passage_entities")


@dataclass
class IndexSet:
    doc_words: InvertedIndex
    doc_entities: InvertedIndex
    passage_words: InvertedIndex
    passage_entities: InvertedIndex


def build_index_set(corpus: Corpus) -> IndexSet:
    doc_ids = sorted(corpus.docs)
    doc_words = build_index(
        (
            (d, analyze_text(f"{corpus.docs[d].title} {corpus.docs[d].body}"))
            for d in doc_ids
        ),
        WORD,
    )
    doc_entities = build_index(
        ((d, corpus.docs[d].entity_tokens()) for d in doc_ids), ENTITY
    )
    passage_words = build_index(
        (
            (p.passage_id, analyze_text(p.text))
            for d in doc_ids
            for p in corpus.passages(d)
        ),
        WORD,
    )
    passage_entities = build_index(
        (
            (p.passage_id, p.entity_tokens())
            for d in doc_ids
            for p in corpus.passages(d)
        ),
        ENTITY,
    )
    return IndexSet(doc_words, doc_entities, passage_words, passage_entities)


def save_index_set(indexes: IndexSet, root: str | Path) -> None:
    root = Path(root)
    for name in SUBDIRS:
        save_index(getattr(indexes, name), root / name)


def load_index_set(root: str | Path) -> IndexSet:
    root = Path(root)
    return IndexSet(*(load_index(root / name) for name in SUBDIRS))
