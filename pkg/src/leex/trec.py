"""TREC-style exchange formats: run files, qrels, topics, CV folds.

Run files are the 6-column "qid Q0 docid rank score tag" format with a
leading comment line carrying the config hash; comment lines start with
'#' and are ignored by all readers here.
"""

from __future__ import annotations

import json
from pathlib import Path

from .corpus import Query
from .errors import ValidationError
from .run import RunEntry, ScoredRun


def write_run(run: ScoredRun, path: str | Path, tag: str, config_hash: str = "") -> None:
    """Emit ranked entries, rank starting at 1 per query, full score precision."""
    path = Path(path)
    lines = [f"# config_hash={config_hash}"]
    for qid in run.qids:
        for rank, entry in enumerate(run.entries(qid), start=1):
            lines.append(f"{qid} Q0 {entry.unit_id} {rank} {entry.score!r} {tag}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_run(path: str | Path) -> ScoredRun:
    path = Path(path)
    run = ScoredRun(path.stem)
    per_qid: dict[str, list[RunEntry]] = {}
    tags: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ValidationError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
            qid, _q0, doc_id, _rank, score, tag = parts
            try:
                value = float(score)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad score {score!r}") from None
            per_qid.setdefault(qid, []).append(RunEntry(doc_id, value, tag))
            tags[qid] = tag
    for qid, entries in per_qid.items():
        run.set_entries(qid, entries)
    return run


def validate_run_file(path: str | Path, depth: int | None = None) -> int:
    """Check run-format invariants; returns the number of data rows.

    Enforced: 6 columns, ranks contiguous from 1 per query, scores
    non-increasing per query, no duplicate docs per query, non-empty tag,
    and (when given) per-query depth <= `depth`.
    """
    path = Path(path)
    rows = 0
    last_rank: dict[str, int] = {}
    last_score: dict[str, float] = {}
    seen: dict[str, set[str]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ValidationError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
            qid, q0, doc_id, rank_s, score_s, tag = parts
            if q0 != "Q0":
                raise ValidationError(f"{path}:{lineno}: column 2 must be Q0, got {q0!r}")
            if not tag:
                raise ValidationError(f"{path}:{lineno}: empty tag")
            try:
                rank = int(rank_s)
                score = float(score_s)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad rank/score") from None
            expected = last_rank.get(qid, 0) + 1
            if rank != expected:
                raise ValidationError(
                    f"{path}:{lineno}: rank {rank} for query {qid}, expected {expected}"
                )
            if qid in last_score and score > last_score[qid]:
                raise ValidationError(
                    f"{path}:{lineno}: score {score} increases over previous for {qid}"
                )
            if doc_id in seen.setdefault(qid, set()):
                raise ValidationError(f"{path}:{lineno}: duplicate doc {doc_id} for {qid}")
            seen[qid].add(doc_id)
            if depth is not None and rank > depth:
                raise ValidationError(f"{path}:{lineno}: rank {rank} exceeds depth {depth}")
            last_rank[qid] = rank
            last_score[qid] = score
            rows += 1
    if rows == 0:
        raise ValidationError(f"{path}: no data rows")
    return rows


def read_qrels(path: str | Path) -> dict[str, dict[str, int]]:
    """Parse "qid 0 docid grade" judgment lines."""
    path = Path(path)
    qrels: dict[str, dict[str, int]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
            qid, _iter, doc_id, grade_s = parts
            try:
                grade = int(grade_s)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad grade {grade_s!r}") from None
            by_doc = qrels.setdefault(qid, {})
            if doc_id in by_doc:
                raise ValidationError(f"{path}:{lineno}: duplicate judgment for {qid}/{doc_id}")
            by_doc[doc_id] = grade
    if not qrels:
        raise ValidationError(f"{path}: empty qrels")
    return qrels


def write_qrels(qrels: dict[str, dict[str, int]], path: str | Path) -> None:
    lines = []
    for qid in sorted(qrels):
        for doc_id in sorted(qrels[qid]):
            lines.append(f"{qid} 0 {doc_id} {qrels[qid][doc_id]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_topics(path: str | Path) -> list[Query]:
    """Parse TSV topics: query_id, text, optional semicolon-joined entity ids."""
    path = Path(path)
    topics: list[Query] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ValidationError(f"{path}:{lineno}: expected 2 or 3 columns")
            qid, text = parts[0], parts[1]
            if qid in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate query_id {qid!r}")
            seen.add(qid)
            entity_ids: tuple[str, ...] = ()
            if len(parts) == 3 and parts[2]:
                entity_ids = tuple(e for e in parts[2].split(";") if e)
            topics.append(Query(qid, text, entity_ids))
    if not topics:
        raise ValidationError(f"{path}: no topics")
    return topics


def write_topics(topics: list[Query], path: str | Path) -> None:
    lines = []
    for q in topics:
        lines.append(f"{q.query_id}\t{q.text}\t{';'.join(q.entity_ids)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_folds(path: str | Path) -> dict[str, tuple[list[str], list[str]]]:
    """Load CV folds {fold_id: {"train": [...], "test": [...]}} from JSON.

    Test sets must be pairwise disjoint and disjoint from their own train
    set; together the folds must cover every query they mention.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: bad folds JSON: {exc}") from exc
    if not isinstance(raw, dict) or not raw:
        raise ValidationError(f"{path}: folds must be a non-empty JSON object")
    folds: dict[str, tuple[list[str], list[str]]] = {}
    all_test: set[str] = set()
    for fold_id, spec in raw.items():
        try:
            train = [str(q) for q in spec["train"]]
            test = [str(q) for q in spec["test"]]
        except (TypeError, KeyError):
            raise ValidationError(f"{path}: fold {fold_id!r} needs train and test lists") from None
        if set(train) & set(test):
            raise ValidationError(f"{path}: fold {fold_id!r} train/test overlap")
        if set(test) & all_test:
            raise ValidationError(f"{path}: fold {fold_id!r} test queries reused")
        all_test.update(test)
        folds[fold_id] = (train, test)
    return folds
