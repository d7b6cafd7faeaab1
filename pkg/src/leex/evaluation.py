"""Rank-measure evaluation (NDCG, MAP, recall) and paired significance.

Binary measures treat grade >= 1 as relevant; unjudged documents count as
grade 0. Aggregation is a macro mean over queries that have at least one
relevant document.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from scipy import stats as scipy_stats

from .errors import ValidationError
from .run import ScoredRun

log = logging.getLogger(__name__)

Qrels = dict[str, dict[str, int]]

DEFAULT_DEPTH = 1000
DEFAULT_MEASURES = ("map", "ndcg", "recall@1000")


@dataclass
class EvalReport:
    measures: tuple[str, ...]
    per_query: dict[str, dict[str, float]]
    aggregate: dict[str, float]
    skipped: list[str] = field(default_factory=list)

    def values(self, measure: str) -> dict[str, float]:
        return {qid: vals[measure] for qid, vals in self.per_query.items()}


def _parse_measure(measure: str, depth: int) -> tuple[str, int]:
    name, _, cut = measure.partition("@")
    if name not in ("ndcg", "map", "recall"):
        raise ValidationError(f"unknown measure {measure!r}")
    if cut:
        try:
            k = int(cut)
        except ValueError:
            raise ValidationError(f"bad measure cutoff in {measure!r}") from None
        if k < 1:
            raise ValidationError(f"bad measure cutoff in {measure!r}")
        return name, k
    return name, depth


def average_precision(ranking: list[str], judged: dict[str, int], depth: int) -> float:
    relevant = {d for d, g in judged.items() if g >= 1}
    if not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for i, doc in enumerate(ranking[:depth], start=1):
        if doc in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def recall_at(ranking: list[str], judged: dict[str, int], k: int) -> float:
    relevant = {d for d, g in judged.items() if g >= 1}
    if not relevant:
        return 0.0
    return len(relevant.intersection(ranking[:k])) / len(relevant)


def ndcg_at(ranking: list[str], judged: dict[str, int], k: int) -> float:
    """Linear gain over log2(rank+1) discount, ideal from sorted grades."""
    dcg = 0.0
    for i, doc in enumerate(ranking[:k], start=1):
        grade = judged.get(doc, 0)
        if grade > 0:
            dcg += grade / math.log2(i + 1)
    ideal = sorted((g for g in judged.values() if g > 0), reverse=True)
    idcg = sum(g / math.log2(i + 1) for i, g in enumerate(ideal[:k], start=1))
    return dcg / idcg if idcg > 0 else 0.0


def evaluate_run(
    run: ScoredRun,
    qrels: Qrels,
    measures: tuple[str, ...] = DEFAULT_MEASURES,
    depth: int = DEFAULT_DEPTH,
) -> EvalReport:
    """Evaluate the run at `depth` for each measure.

    Queries absent from the qrels are skipped with a warning; queries whose
    judgments contain no relevant document are left out of per-query and
    aggregate blocks.
    """
    parsed = [(m, *_parse_measure(m, depth)) for m in measures]
    per_query: dict[str, dict[str, float]] = {}
    skipped: list[str] = []
    for qid in run.qids:
        judged = qrels.get(qid)
        if judged is None:
            log.warning("query %s not judged; skipping", qid)
            skipped.append(qid)
            continue
        if not any(g >= 1 for g in judged.values()):
            skipped.append(qid)
            continue
        ranking = [e.unit_id for e in run.top(qid, depth)]
        row: dict[str, float] = {}
        for label, name, k in parsed:
            if name == "map":
                row[label] = average_precision(ranking, judged, k)
            elif name == "recall":
                row[label] = recall_at(ranking, judged, k)
            else:
                row[label] = ndcg_at(ranking, judged, k)
        per_query[qid] = row
    if not per_query:
        raise ValidationError("no query in the run has relevant judgments")
    aggregate = {
        m: sum(row[m] for row in per_query.values()) / len(per_query)
        for m in measures
    }
    return EvalReport(tuple(measures), per_query, aggregate, skipped)


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    significant: bool


def paired_t_test(a: dict[str, float], b: dict[str, float], alpha: float = 0.05) -> TTestResult:
    """Two-sided paired t-test over aligned per-query values.

    Degenerate difference vectors short-circuit: all-zero → (0, 1);
    zero variance with nonzero mean → certainty (p = 0).
    """
    if set(a) != set(b):
        raise ValidationError("paired test needs identical query sets")
    qids = sorted(a)
    if len(qids) < 2:
        raise ValidationError(f"paired test needs >= 2 queries, got {len(qids)}")
    diffs = [a[q] - b[q] for q in qids]
    mean = sum(diffs) / len(diffs)
    if all(d == diffs[0] for d in diffs):
        if mean == 0.0:
            return TTestResult(0.0, 1.0, False)
        return TTestResult(math.copysign(math.inf, mean), 0.0, True)
    res = scipy_stats.ttest_rel([a[q] for q in qids], [b[q] for q in qids])
    return TTestResult(float(res.statistic), float(res.pvalue), bool(res.pvalue < alpha))


def write_report(report: EvalReport, path) -> None:
    """TSV rows "measure qid value"; aggregates under qid "all"."""
    lines = []
    for qid in sorted(report.per_query):
        for m in report.measures:
            lines.append(f"{m}\t{qid}\t{report.per_query[qid][m]:.6f}")
    for m in report.measures:
        lines.append(f"{m}\tall\t{report.aggregate[m]:.6f}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
