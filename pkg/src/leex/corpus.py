"""Pre-linked document collections and overlapping passage shards.

Corpus records arrive as JSONL with entity mentions already attached
(linking happens upstream); this module only validates, clamps bad offsets,
and cuts documents into sentence-window passages.
"""

from __future__ import annotations

import bisect
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import ValidationError

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 10
DEFAULT_STRIDE = 5


@dataclass(frozen=True)
class EntityMention:
    entity_id: str
    surface: str
    start: int
    end: int


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str
    mentions: tuple[EntityMention, ...] = ()

    def entity_tokens(self) -> list[str]:
        """One token per mention occurrence (entity length = mention count)."""
        return [m.entity_id for m in self.mentions]


@dataclass(frozen=True)
class Passage:
    doc_id: str
    passage_idx: int
    sentence_range: tuple[int, int]
    text: str
    mentions: tuple[EntityMention, ...] = ()

    @property
    def passage_id(self) -> str:
        return make_passage_id(self.doc_id, self.passage_idx)

    def entity_tokens(self) -> list[str]:
        return [m.entity_id for m in self.mentions]


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str
    entity_ids: tuple[str, ...] = ()


def make_passage_id(doc_id: str, passage_idx: int) -> str:
    return f"{doc_id}#p{passage_idx}"


def parent_doc_id(passage_id: str) -> str:
    return passage_id.rsplit("#p", 1)[0]


# ---------------------------------------------------------------------------
# Sentence segmentation
# ---------------------------------------------------------------------------


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Character spans of sentences, in order.

    A sentence ends at '.', '!' or '?' followed by whitespace or end of
    text, except when the '.' sits inside a run of digits ("3.5" stays one
    sentence). Spans are trimmed of surrounding whitespace.
    """
    spans: list[tuple[int, int]] = []
    n = len(text)
    start = 0
    for i, ch in enumerate(text):
        if ch not in ".!?":
            continue
        at_end = i + 1 >= n
        if not at_end and not text[i + 1].isspace():
            continue
        if ch == "." and 0 < i < n - 1 and text[i - 1].isdigit() and text[i + 1].isdigit():
            continue
        span = _trimmed_span(text, start, i + 1)
        if span is not None:
            spans.append(span)
        start = i + 1
    span = _trimmed_span(text, start, n)
    if span is not None:
        spans.append(span)
    return spans


def _trimmed_span(text: str, start: int, end: int) -> tuple[int, int] | None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return (start, end) if start < end else None


def _sentence_of_offset(starts: list[int], pos: int) -> int:
    """Index of the sentence containing a character offset.

    A mention belongs to the sentence containing its start offset; offsets
    in inter-sentence whitespace attach to the preceding sentence.
    """
    return max(0, bisect.bisect_right(starts, pos) - 1)


# ---------------------------------------------------------------------------
# Passage sharding
# ---------------------------------------------------------------------------


def shard_passages(
    doc: Document, window: int = DEFAULT_WINDOW, stride: int = DEFAULT_STRIDE
) -> list[Passage]:
    """Cut a document into overlapping sentence windows.

    Passage i covers sentences [i*stride, i*stride + window - 1] clipped to
    the document; emission stops with the first passage that reaches the
    last sentence. Mentions follow the sentence containing their start.
    """
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    if not 1 <= stride <= window:
        raise ValidationError(f"stride must be in [1, window], got {stride}")

    sents = split_sentences(doc.body)
    if not sents:
        return []
    starts = [s for s, _ in sents]
    mention_sents = [(m, _sentence_of_offset(starts, m.start)) for m in doc.mentions]

    n = len(sents)
    passages: list[Passage] = []
    idx = 0
    while True:
        first = idx * stride
        last = min(first + window - 1, n - 1)
        text = doc.body[sents[first][0] : sents[last][1]]
        mentions = tuple(m for m, si in mention_sents if first <= si <= last)
        passages.append(
            Passage(
                doc_id=doc.doc_id,
                passage_idx=idx,
                sentence_range=(first, last),
                text=text,
                mentions=mentions,
            )
        )
        if last == n - 1:
            break
        idx += 1
    return passages


# ---------------------------------------------------------------------------
# JSONL corpus loading
# ---------------------------------------------------------------------------


@dataclass
class LoadReport:
    documents: int = 0
    clamped_mentions: int = 0
    dropped_mentions: int = 0


def load_corpus(path: str | Path, report: LoadReport | None = None) -> Iterator[Document]:
    """Stream Documents from a JSONL file in file order.

    Record shape: {"id", "title", "contents", "entities": [{"entity_id",
    "surface", "start", "end"}]}. Mention offsets beyond the body are
    clamped (counted in the report); duplicate ids abort the load.
    """
    path = Path(path)
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: bad JSON record: {exc}") from exc
            doc = _parse_record(rec, path, lineno, report)
            if doc.doc_id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            if report is not None:
                report.documents += 1
            yield doc


def _parse_record(
    rec: dict, path: Path, lineno: int, report: LoadReport | None
) -> Document:
    try:
        doc_id = str(rec["id"])
        title = str(rec.get("title", ""))
        body = str(rec["contents"])
    except KeyError as exc:
        raise ValidationError(f"{path}:{lineno}: record missing field {exc}") from exc

    mentions: list[EntityMention] = []
    for ent in rec.get("entities", []):
        eid = str(ent.get("entity_id", ""))
        start = int(ent.get("start", 0))
        end = int(ent.get("end", 0))
        surface = str(ent.get("surface", ""))
        clamped = False
        if start < 0:
            start, clamped = 0, True
        if end > len(body):
            end, clamped = len(body), True
        if start > len(body):
            start, clamped = len(body), True
        if not eid or start >= end:
            if report is not None:
                report.dropped_mentions += 1
            log.warning("%s:%d: dropped unusable mention %r", path, lineno, ent)
            continue
        if clamped:
            if report is not None:
                report.clamped_mentions += 1
            log.warning("%s:%d: clamped mention offsets for %s", path, lineno, eid)
        mentions.append(EntityMention(eid, surface, start, end))
    return Document(doc_id=doc_id, title=title, body=body, mentions=tuple(mentions))


class Corpus:
    """In-memory corpus with memoized passage shards.

    Passages are cut lazily per document and cached; the title is prepended
    to passage text for scorer calls only, never for index statistics.
    """

    def __init__(
        self,
        docs: Iterator[Document] | list[Document],
        window: int = DEFAULT_WINDOW,
        stride: int = DEFAULT_STRIDE,
    ):
        self.window = window
        self.stride = stride
        self.docs: dict[str, Document] = {}
        for doc in docs:
            if doc.doc_id in self.docs:
                raise ValidationError(f"duplicate doc_id {doc.doc_id!r}")
            self.docs[doc.doc_id] = doc
        self._passage_cache: dict[str, list[Passage]] = {}

    @classmethod
    def load(
        cls,
        path: str | Path,
        window: int = DEFAULT_WINDOW,
        stride: int = DEFAULT_STRIDE,
        report: LoadReport | None = None,
    ) -> "Corpus":
        return cls(load_corpus(path, report=report), window=window, stride=stride)

    def __len__(self) -> int:
        return len(self.docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.docs

    def document(self, doc_id: str) -> Document:
        try:
            return self.docs[doc_id]
        except KeyError:
            raise ValidationError(f"doc_id {doc_id!r} not in corpus") from None

    def passages(self, doc_id: str) -> list[Passage]:
        if doc_id not in self._passage_cache:
            self._passage_cache[doc_id] = shard_passages(
                self.document(doc_id), self.window, self.stride
            )
        return self._passage_cache[doc_id]

    def scoring_text(self, passage: Passage) -> str:
        title = self.docs[passage.doc_id].title
        return f"{title} {passage.text}".strip()
