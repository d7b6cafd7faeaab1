from __future__ import annotations

import pytest

from leex import Corpus, RunEntry, ScoredRun, build_index, build_index_set
from leex.corpus import Document, EntityMention
from leex.index import InvertedIndex

from oracles import write_synth

SYNTH_SEED = 20260815


def units_index(units: dict[str, list[str]], vocab_kind: str = "word") -> InvertedIndex:
    return build_index(sorted(units.items()), vocab_kind)


def make_run(name: str, lists: dict[str, list[tuple[str, float]]]) -> ScoredRun:
    run = ScoredRun(name)
    for qid, pairs in lists.items():
        run.set_entries(qid, [RunEntry(d, s, name) for d, s in pairs])
    return run


# (doc_id, title, contents, [(entity_id, surface), ...]); offsets are located
# by first occurrence of the surface form so the fixtures can't drift.
TOY_DOCS = [
    (
        "plague",
        "The Black Death",
        "The plague spread along trade routes. Rats carried infected fleas "
        "aboard merchant ships. Harbor towns fell first. Quarantine laws "
        "came too late for most ports.",
        [("Q133780", "plague"), ("Q36396", "Rats"), ("Q17517", "ships")],
    ),
    (
        "silk",
        "Silk Road",
        "Caravans moved silk and spice across the steppe. Trade enriched "
        "oasis cities. Merchants traded grain for silver.",
        [("Q36396", "steppe")],
    ),
    (
        "harbor",
        "Harbor Economics",
        "A harbor collects tariffs on every ship. Grain ships pay less than "
        "silk ships. The harbor master keeps the ledger.",
        [("Q17517", "ship"), ("Q283202", "harbor")],
    ),
]


def toy_documents() -> list[Document]:
    docs = []
    for doc_id, title, contents, ents in TOY_DOCS:
        mentions = []
        for entity_id, surface in ents:
            start = contents.find(surface)
            assert start >= 0, (doc_id, surface)
            mentions.append(EntityMention(entity_id, surface, start, start + len(surface)))
        docs.append(Document(doc_id, title, contents, tuple(mentions)))
    return docs


@pytest.fixture()
def toy_corpus() -> Corpus:
    return Corpus(toy_documents(), window=2, stride=1)


@pytest.fixture(scope="session")
def synth_paths(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    return write_synth(root, SYNTH_SEED)


@pytest.fixture(scope="session")
def synth_corpus_loaded(synth_paths):
    corpus_path, _topics_path, _qrels_path = synth_paths
    corpus = Corpus.load(corpus_path)
    indexes = build_index_set(corpus)
    return corpus, indexes


@pytest.fixture(scope="session")
def echo_scorer_script(tmp_path_factory) -> str:
    """A wire-protocol scorer command: deterministic hash-based scores."""
    path = tmp_path_factory.mktemp("scorer") / "echo_scorer.py"
    path.write_text(
        "import hashlib, json, sys\n"
        "for line in sys.stdin:\n"
        "    req = json.loads(line)\n"
        "    scores = []\n"
        "    for p in req['passages']:\n"
        "        h = hashlib.sha256((req['qid'] + p['text']).encode()).digest()\n"
        "        scores.append(int.from_bytes(h[:4], 'big') / 2**32)\n"
        "    print(json.dumps({'qid': req['qid'], 'scores': scores}), flush=True)\n"
    )
    return f"python3 {path}"
