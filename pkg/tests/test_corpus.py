import json
import random

import pytest

from leex.corpus import (
    Corpus,
    Document,
    EntityMention,
    LoadReport,
    load_corpus,
    make_passage_id,
    parent_doc_id,
    shard_passages,
    split_sentences,
)
from leex.errors import ValidationError


def doc_of(n_sentences: int, doc_id: str = "d") -> Document:
    body = " ".join(f"Sentence number {i} here." for i in range(n_sentences))
    return Document(doc_id, "t", body, ())


def spans(doc: Document) -> list[tuple[int, int]]:
    return [p.sentence_range for p in shard_passages(doc, window=10, stride=5)]


def test_sharding_examples():
    assert spans(doc_of(12)) == [(0, 9), (5, 11)]
    assert spans(doc_of(3)) == [(0, 2)]
    assert spans(doc_of(10)) == [(0, 9)]
    assert shard_passages(Document("d", "t", "", ())) == []


def test_sharding_stops_at_first_full_coverage():
    # sentence 14 first appears in passage starting at 10; no passage at 15
    assert spans(doc_of(15)) == [(0, 9), (5, 14)]
    assert spans(doc_of(16)) == [(0, 9), (5, 14), (10, 15)]


def test_sharding_parameter_validation():
    with pytest.raises(ValidationError):
        shard_passages(doc_of(3), window=0, stride=1)
    with pytest.raises(ValidationError):
        shard_passages(doc_of(3), window=5, stride=6)
    with pytest.raises(ValidationError):
        shard_passages(doc_of(3), window=5, stride=0)


def test_sharding_invariants_random():
    rng = random.Random(4)
    for _ in range(50):
        n = rng.randint(1, 40)
        window = rng.randint(1, 12)
        stride = rng.randint(1, window)
        ps = shard_passages(doc_of(n), window=window, stride=stride)
        covered = set()
        for i, p in enumerate(ps):
            first, last = p.sentence_range
            assert p.passage_idx == i
            assert first == i * stride
            assert first <= last < n
            covered.update(range(first, last + 1))
        assert covered == set(range(n))
        # every passage except the last spans the full window
        for p in ps[:-1]:
            assert p.sentence_range[1] - p.sentence_range[0] == window - 1


def test_passage_text_matches_sentence_span():
    doc = doc_of(12)
    ps = shard_passages(doc, window=10, stride=5)
    assert ps[0].text.startswith("Sentence number 0")
    assert ps[0].text.endswith("number 9 here.")
    assert ps[1].text.startswith("Sentence number 5")
    assert ps[1].text.endswith("number 11 here.")


def test_mentions_follow_their_start_sentence():
    body = "Alpha met beta. Gamma saw delta. Epsilon left."
    m1 = EntityMention("E1", "Alpha", 0, 5)
    m2 = EntityMention("E2", "Gamma", body.index("Gamma"), body.index("Gamma") + 5)
    m3 = EntityMention("E3", "Epsilon", body.index("Epsilon"), body.index("Epsilon") + 7)
    doc = Document("d", "t", body, (m1, m2, m3))
    ps = shard_passages(doc, window=2, stride=1)
    assert [p.sentence_range for p in ps] == [(0, 1), (1, 2)]
    assert [m.entity_id for m in ps[0].mentions] == ["E1", "E2"]
    assert [m.entity_id for m in ps[1].mentions] == ["E2", "E3"]


def test_split_sentences_rules():
    text = "Costs rose 3.5 percent! Is that right? Yes. Final"
    parts = [text[a:b] for a, b in split_sentences(text)]
    assert parts == ["Costs rose 3.5 percent!", "Is that right?", "Yes.", "Final"]
    assert split_sentences("   ") == []


def test_passage_id_round_trip():
    assert make_passage_id("doc1", 3) == "doc1#p3"
    assert parent_doc_id("doc1#p3") == "doc1"
    assert parent_doc_id("plain-doc") == "plain-doc"


def test_load_corpus_order_and_empty_entities(tmp_path):
    rows = [
        {"id": "a", "title": "A", "contents": "One. Two.", "entities": []},
        {"id": "b", "title": "B", "contents": "Three."},
        {
            "id": "c",
            "title": "C",
            "contents": "Paris is old.",
            "entities": [{"entity_id": "Q90", "surface": "Paris", "start": 0, "end": 5}],
        },
    ]
    path = tmp_path / "c.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    docs = list(load_corpus(path))
    assert [d.doc_id for d in docs] == ["a", "b", "c"]
    assert docs[0].mentions == () and docs[1].mentions == ()
    assert docs[2].mentions[0].entity_id == "Q90"


def test_load_corpus_clamps_bad_offsets(tmp_path):
    body = "Short body."
    rec = {
        "id": "a",
        "title": "",
        "contents": body,
        "entities": [
            {"entity_id": "Q1", "surface": "x", "start": 3, "end": len(body) + 5},
            {"entity_id": "Q2", "surface": "y", "start": 0, "end": 4},
        ],
    }
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    report = LoadReport()
    (doc,) = list(load_corpus(path, report=report))
    assert report.clamped_mentions == 1
    assert doc.mentions[0].end == len(body)
    assert doc.mentions[1].end == 4


def test_load_corpus_duplicate_id_fatal(tmp_path):
    rec = json.dumps({"id": "dup", "title": "", "contents": "x."})
    path = tmp_path / "c.jsonl"
    path.write_text(rec + "\n" + rec + "\n")
    with pytest.raises(ValidationError, match="dup"):
        list(load_corpus(path))


def test_load_corpus_bad_json_names_line(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "title": "", "contents": "x."}\n{broken\n')
    with pytest.raises(ValidationError, match=r":2: bad JSON"):
        list(load_corpus(path))


def test_corpus_scoring_text_prepends_title(toy_corpus: Corpus):
    p0 = toy_corpus.passages("plague")[0]
    text = toy_corpus.scoring_text(p0)
    assert text.startswith("The Black Death")
    assert p0.text in text
    assert "The Black Death" not in p0.text


def test_corpus_passages_memoized(toy_corpus: Corpus):
    assert toy_corpus.passages("plague") is toy_corpus.passages("plague")
    with pytest.raises(ValidationError):
        toy_corpus.passages("missing-doc")
