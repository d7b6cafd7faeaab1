"""Hyperparameter search over the expansion grid with CV folds.

The full grid is large (291,600 points), so the default strategy is
coordinate descent: sweep one parameter at a time against the train
queries, holding the others at their incumbent values, for a fixed number
of rounds. The exhaustive grid sits behind a flag. Selection only ever
sees train queries; each fold's winner is applied to its test queries and
the test results are concatenated.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

from .config import PipelineConfig, resolve_config
from .corpus import Corpus, Query
from .errors import LeexError, ValidationError
from .evaluation import Qrels, evaluate_run
from .indexset import IndexSet
from .pipelines import run_pipeline
from .run import ScoredRun

log = logging.getLogger(__name__)

# sweep order doubles as the tie-break order after fb_docs and fb_terms
GRID_KEYS = (
    "expansion.fb_docs",
    "expansion.fb_terms",
    "expansion.original_query_weight",
    "expansion.beta",
    "expansion.lambda",
    "expansion.k_lee",
)


def default_grids() -> dict[str, list[str]]:
    return {
        "expansion.fb_docs": [str(v) for v in range(10, 101, 10)],
        "expansion.fb_terms": [str(v) for v in range(10, 101, 10)],
        "expansion.original_query_weight": [repr(i / 10) for i in range(1, 10)],
        "expansion.beta": [repr(i / 10) for i in range(1, 10)],
        "expansion.lambda": [repr(i / 10) for i in range(1, 10)],
        "expansion.k_lee": ["1000", "2000", "3000", "4000"],
    }


def enumerate_grid(grids: dict[str, list[str]]) -> Iterator[dict[str, str]]:
    keys = list(grids)
    for combo in itertools.product(*(grids[k] for k in keys)):
        yield dict(zip(keys, combo))


def grid_size(grids: dict[str, list[str]]) -> int:
    size = 1
    for values in grids.values():
        size *= len(values)
    return size


@dataclass
class FoldOutcome:
    fold_id: str
    train_qids: list[str]
    test_qids: list[str]
    selection: dict[str, str]
    train_score: float
    test_per_query: dict[str, float]
    failed_points: list[dict] = field(default_factory=list)
    points_evaluated: int = 0


@dataclass
class SweepReport:
    measure: str
    folds: list[FoldOutcome]
    aggregate: float
    test_run: ScoredRun


def _point_key(point: dict[str, str]) -> tuple:
    """Tie-break ordering: fb_docs, fb_terms, then the remaining grid keys."""
    return tuple(float(point.get(k, "inf")) for k in GRID_KEYS)


class _PointEvaluator:
    """Runs one grid point's pipeline on a fixed query subset and scores it."""

    def __init__(
        self,
        base: PipelineConfig,
        corpus: Corpus,
        indexes: IndexSet,
        topics: list[Query],
        qrels: Qrels,
        measure: str,
    ):
        self.base = base
        self.corpus = corpus
        self.indexes = indexes
        self.topics = topics
        self.qrels = qrels
        self.measure = measure

    def config_at(self, point: dict[str, str]) -> PipelineConfig:
        return resolve_config(dict(self.base.flat), point)

    def run(self, point: dict[str, str]) -> tuple[ScoredRun, dict[str, float], float]:
        config = self.config_at(point)
        result = run_pipeline(config, self.corpus, self.indexes, self.topics)
        report = evaluate_run(
            result.final_run, self.qrels, (self.measure,), depth=config.run_depth
        )
        return result.final_run, report.values(self.measure), report.aggregate[self.measure]

    def score(self, point: dict[str, str]) -> float:
        return self.run(point)[2]


def _select(
    evaluator: _PointEvaluator,
    points: list[dict[str, str]],
    workers: int,
    failed: list[dict],
) -> tuple[dict[str, str] | None, float]:
    """Argmax of the target measure over points; failures are recorded."""

    def attempt(point: dict[str, str]):
        try:
            return evaluator.score(point)
        except LeexError as exc:
            return exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(attempt, points))
    else:
        outcomes = [attempt(p) for p in points]

    best: dict[str, str] | None = None
    best_score = float("-inf")
    for point, outcome in zip(points, outcomes):
        if isinstance(outcome, LeexError):
            log.warning("grid point %s failed: %s", point, outcome)
            failed.append({"point": dict(point), "error": str(outcome)})
            continue
        if outcome > best_score or (
            outcome == best_score
            and best is not None
            and _point_key(point) < _point_key(best)
        ):
            best, best_score = point, outcome
    return best, best_score


def _coordinate_descent(
    evaluator: _PointEvaluator,
    grids: dict[str, list[str]],
    start: dict[str, str],
    rounds: int,
    workers: int,
    failed: list[dict],
) -> tuple[dict[str, str], float, int]:
    current = dict(start)
    current_score = float("-inf")
    evaluated = 0
    for _round in range(rounds):
        for key in grids:
            candidates = [dict(current, **{key: v}) for v in grids[key]]
            evaluated += len(candidates)
            best, best_score = _select(evaluator, candidates, workers, failed)
            if best is not None and best_score >= current_score:
                if best_score > current_score or _point_key(best) < _point_key(current):
                    current, current_score = best, best_score
                else:
                    current_score = best_score
    if current_score == float("-inf"):
        raise ValidationError("every grid point failed during coordinate descent")
    return current, current_score, evaluated


def sweep(
    base: PipelineConfig,
    grids: dict[str, list[str]],
    folds: dict[str, tuple[list[str], list[str]]],
    corpus: Corpus,
    indexes: IndexSet,
    topics: list[Query],
    qrels: Qrels,
    measure: str = "recall@1000",
    full_grid: bool = False,
    rounds: int = 2,
    workers: int = 1,
) -> SweepReport:
    """Per-fold selection on train queries, application on test queries."""
    if not grids:
        raise ValidationError("empty grids")
    topic_map = {q.query_id: q for q in topics}
    covered = {qid for _train, test in folds.values() for qid in test}
    if covered != set(topic_map):
        missing = sorted(set(topic_map) ^ covered)
        raise ValidationError(f"folds do not partition the query set: {missing}")

    outcomes: list[FoldOutcome] = []
    test_run = ScoredRun("sweep-test")
    per_query_all: dict[str, float] = {}
    for fold_id in sorted(folds):
        train_qids, test_qids = folds[fold_id]
        unknown = [q for q in train_qids + test_qids if q not in topic_map]
        if unknown:
            raise ValidationError(f"fold {fold_id}: unknown query ids {unknown}")
        train_topics = [topic_map[q] for q in train_qids]
        test_topics = [topic_map[q] for q in test_qids]

        failed: list[dict] = []
        train_eval = _PointEvaluator(base, corpus, indexes, train_topics, qrels, measure)
        if full_grid:
            points = list(enumerate_grid(grids))
            best, best_score = _select(train_eval, points, workers, failed)
            if best is None:
                raise ValidationError(f"fold {fold_id}: every grid point failed")
            evaluated = len(points)
        else:
            start = {k: base.flat[k] for k in grids}
            best, best_score, evaluated = _coordinate_descent(
                train_eval, grids, start, rounds, workers, failed
            )

        test_eval = _PointEvaluator(base, corpus, indexes, test_topics, qrels, measure)
        fold_run, per_query, _agg = test_eval.run(best)
        for qid in fold_run.qids:
            test_run.set_entries(qid, fold_run.entries(qid))
        per_query_all.update(per_query)
        outcomes.append(
            FoldOutcome(
                fold_id=fold_id,
                train_qids=list(train_qids),
                test_qids=list(test_qids),
                selection=dict(best),
                train_score=best_score,
                test_per_query=per_query,
                failed_points=failed,
                points_evaluated=evaluated,
            )
        )

    aggregate = sum(per_query_all.values()) / len(per_query_all) if per_query_all else 0.0
    return SweepReport(measure, outcomes, aggregate, test_run)
