import math
import random

import pytest
import scipy.stats

import oracles
from conftest import make_run
from leex.errors import ValidationError
from leex.evaluation import (
    average_precision,
    evaluate_run,
    ndcg_at,
    paired_t_test,
    recall_at,
    write_report,
)


def toy_run():
    return make_run("r", {"q1": [("d1", 3.0), ("d2", 2.0), ("d3", 1.0)]})


TOY_QRELS = {"q1": {"d1": 1, "d3": 1}}


def test_hand_computed_values():
    report = evaluate_run(toy_run(), TOY_QRELS, ("map", "recall@2", "ndcg"), depth=10)
    q = report.per_query["q1"]
    assert q["map"] == pytest.approx((1 + 2 / 3) / 2, abs=1e-4)
    assert q["recall@2"] == pytest.approx(0.5, abs=1e-4)
    # DCG = 1/log2(2) + 1/log2(4) = 1.5; IDCG = 1 + 1/log2(3)
    idcg = 1 + 1 / math.log2(3)
    assert q["ndcg"] == pytest.approx(1.5 / idcg, abs=1e-4)
    assert q["ndcg"] == pytest.approx(0.9197, abs=1e-4)


def test_perfect_run_scores_one():
    run = make_run("r", {"q1": [("d1", 9.0), ("d3", 8.0), ("d2", 7.0)]})
    report = evaluate_run(run, TOY_QRELS, ("map", "recall@1000", "ndcg"), depth=1000)
    assert report.per_query["q1"] == {"map": 1.0, "recall@1000": 1.0, "ndcg": 1.0}


def test_graded_ndcg_ideal_uses_all_judged():
    # d9 (grade 3) never retrieved, but the ideal still counts it
    run = make_run("r", {"q1": [("d1", 2.0), ("d2", 1.0)]})
    qrels = {"q1": {"d1": 1, "d2": 2, "d9": 3}}
    got = evaluate_run(run, qrels, ("ndcg",), depth=10).per_query["q1"]["ndcg"]
    dcg = 1 / math.log2(2) + 2 / math.log2(3)
    idcg = 3 / math.log2(2) + 2 / math.log2(3) + 1 / math.log2(4)
    assert got == pytest.approx(dcg / idcg, abs=1e-12)


def test_unjudged_query_skipped_zero_relevant_excluded(caplog):
    run = make_run(
        "r",
        {
            "q1": [("d1", 1.0)],
            "q2": [("d2", 1.0)],  # judged, but nothing relevant
            "q3": [("d3", 1.0)],  # not in qrels at all
        },
    )
    qrels = {"q1": {"d1": 1}, "q2": {"d2": 0}}
    with caplog.at_level("WARNING"):
        report = evaluate_run(run, qrels, ("map",), depth=10)
    assert set(report.per_query) == {"q1"}
    assert report.skipped == ["q2", "q3"]
    assert report.aggregate["map"] == 1.0
    assert any("q3" in r.message for r in caplog.records)


def test_no_evaluable_queries_is_an_error():
    run = make_run("r", {"q9": [("d1", 1.0)]})
    with pytest.raises(ValidationError):
        evaluate_run(run, TOY_QRELS, ("map",), depth=10)


def test_aggregate_is_macro_mean():
    run = make_run(
        "r",
        {
            "q1": [("d1", 2.0), ("d9", 1.0)],  # AP 1.0
            "q2": [("d9", 2.0), ("d1", 1.0)],  # AP 0.5
        },
    )
    qrels = {"q1": {"d1": 1}, "q2": {"d1": 1}}
    report = evaluate_run(run, qrels, ("map",), depth=10)
    assert report.aggregate["map"] == pytest.approx(0.75)
    assert report.values("map") == {
        "q1": pytest.approx(1.0),
        "q2": pytest.approx(0.5),
    }


def test_depth_truncates_before_scoring():
    run = make_run("r", {"q1": [("d9", 3.0), ("d8", 2.0), ("d1", 1.0)]})
    report = evaluate_run(run, {"q1": {"d1": 1}}, ("map", "recall@1000"), depth=2)
    assert report.per_query["q1"]["map"] == 0.0
    assert report.per_query["q1"]["recall@1000"] == 0.0


def test_bad_measure_rejected():
    with pytest.raises(ValidationError):
        evaluate_run(toy_run(), TOY_QRELS, ("precision@5",), depth=10)
    with pytest.raises(ValidationError):
        evaluate_run(toy_run(), TOY_QRELS, ("ndcg@zero",), depth=10)


def test_measures_match_reference_evaluator_50_queries():
    rng = random.Random(60)
    lists: dict[str, list[tuple[str, float]]] = {}
    qrels: dict[str, dict[str, int]] = {}
    for i in range(50):
        qid = f"q{i:02d}"
        docs = [f"d{j}" for j in range(rng.randint(5, 60))]
        rng.shuffle(docs)
        lists[qid] = [(d, float(len(docs) - r)) for r, d in enumerate(docs)]
        judged = rng.sample(docs, k=rng.randint(1, min(12, len(docs))))
        qrels[qid] = {d: rng.randint(0, 3) for d in judged}
        qrels[qid][judged[0]] = max(1, qrels[qid][judged[0]])  # ≥1 relevant
        if rng.random() < 0.3:  # some relevant docs the run never retrieved
            qrels[qid][f"missing{i}"] = rng.randint(1, 3)
    run = make_run("r", lists)
    report = evaluate_run(run, qrels, ("map", "recall@10", "ndcg", "ndcg@10"), depth=30)
    for qid, vals in report.per_query.items():
        ranking = [d for d, _ in lists[qid]][:30]
        assert vals["map"] == pytest.approx(
            oracles.ref_ap(ranking, qrels[qid], 30), abs=1e-4
        )
        assert vals["recall@10"] == pytest.approx(
            oracles.ref_recall(ranking, qrels[qid], 10), abs=1e-4
        )
        assert vals["ndcg"] == pytest.approx(
            oracles.ref_ndcg(ranking, qrels[qid], 30), abs=1e-4
        )
        assert vals["ndcg@10"] == pytest.approx(
            oracles.ref_ndcg(ranking, qrels[qid], 10), abs=1e-4
        )


def test_ndcg_matches_sklearn():
    pytest.importorskip("sklearn")
    from sklearn.metrics import ndcg_score

    rng = random.Random(61)
    for k in (5, 10, 25):
        for _ in range(20):
            n = rng.randint(2, 40)
            grades = [rng.randint(0, 3) for _ in range(n)]
            if not any(grades):
                grades[0] = 2
            ranking = [f"d{j}" for j in range(n)]
            rng.shuffle(ranking)
            judged = {f"d{j}": g for j, g in enumerate(grades)}
            got = ndcg_at(ranking, judged, k)
            y_true = [[judged[d] for d in ranking]]
            y_score = [[float(n - r) for r in range(n)]]
            want = ndcg_score(y_true, y_score, k=k, ignore_ties=True)
            assert got == pytest.approx(want, abs=1e-9)


def test_rank_based_invariance_to_affine_score_transforms():
    rng = random.Random(62)
    lists = {"q1": [(f"d{j}", 50.0 - j) for j in range(20)]}
    qrels = {"q1": {f"d{j}": rng.randint(0, 2) for j in range(0, 20, 3)}}
    qrels["q1"]["d0"] = 2
    base = evaluate_run(make_run("a", lists), qrels, ("map", "ndcg"), depth=20)
    shifted = {
        "q1": [(d, 0.001 * s + 7.0) for d, s in lists["q1"]]
    }
    other = evaluate_run(make_run("b", shifted), qrels, ("map", "ndcg"), depth=20)
    assert base.per_query == other.per_query


def test_permuting_below_deepest_relevant_is_invisible():
    lists = {"q1": [("d1", 9.0), ("d2", 8.0), ("d3", 7.0), ("d4", 6.0)]}
    swapped = {"q1": [("d1", 9.0), ("d2", 8.0), ("d4", 7.0), ("d3", 6.0)]}
    qrels = {"q1": {"d1": 1, "d2": 1}}
    a = evaluate_run(make_run("a", lists), qrels, ("map", "recall@4"), depth=4)
    b = evaluate_run(make_run("b", swapped), qrels, ("map", "recall@4"), depth=4)
    assert a.per_query == b.per_query


def test_measure_helpers_direct():
    assert average_precision(["d1", "d2", "d3"], {"d1": 1, "d3": 1}, 3) == pytest.approx(
        (1 + 2 / 3) / 2
    )
    assert recall_at(["d1", "d2"], {"d1": 1, "d3": 1}, 2) == 0.5
    assert ndcg_at([], {"d1": 1}, 5) == 0.0


# --- paired t-test -------------------------------------------------------------


def test_t_test_identical_systems():
    vals = {"q1": 0.3, "q2": 0.5, "q3": 0.7}
    res = paired_t_test(vals, dict(vals))
    assert res.t == 0.0 and res.p == 1.0 and not res.significant


def test_t_test_zero_variance_nonzero_mean():
    a = {f"q{i}": 0.5 + 0.1 for i in range(4)}
    b = {f"q{i}": 0.5 for i in range(4)}
    res = paired_t_test(a, b)
    assert res.p == 0.0 and res.significant


def test_t_test_matches_scipy():
    rng = random.Random(63)
    for _ in range(20):
        n = rng.randint(3, 30)
        a = {f"q{i}": rng.random() for i in range(n)}
        b = {f"q{i}": rng.random() for i in range(n)}
        res = paired_t_test(a, b)
        want = scipy.stats.ttest_rel(
            [a[f"q{i}"] for i in range(n)], [b[f"q{i}"] for i in range(n)]
        )
        assert res.t == pytest.approx(want.statistic, abs=1e-12)
        assert res.p == pytest.approx(want.pvalue, abs=1e-12)
        assert res.significant == (res.p < 0.05)


def test_t_test_antisymmetry():
    a = {"q1": 0.2, "q2": 0.9, "q3": 0.4, "q4": 0.6}
    b = {"q1": 0.1, "q2": 0.8, "q3": 0.7, "q4": 0.5}
    ab, ba = paired_t_test(a, b), paired_t_test(b, a)
    assert ab.t == pytest.approx(-ba.t)
    assert ab.p == pytest.approx(ba.p)


def test_t_test_input_validation():
    with pytest.raises(ValidationError):
        paired_t_test({"q1": 0.1}, {"q2": 0.1})
    with pytest.raises(ValidationError):
        paired_t_test({"q1": 0.1}, {"q1": 0.2})


def test_write_report(tmp_path):
    report = evaluate_run(toy_run(), TOY_QRELS, ("map", "recall@2"), depth=10)
    out = tmp_path / "report.tsv"
    write_report(report, out)
    lines = out.read_text().strip().split("\n")
    assert all(len(line.split("\t")) == 3 for line in lines)
    assert any(line.startswith("map\tq1\t") for line in lines)
    assert lines[-2] == "map\tall\t0.833333"
    assert lines[-1] == "recall@2\tall\t0.500000"
    write_report(report, tmp_path / "again.tsv")
    assert (tmp_path / "again.tsv").read_text() == out.read_text()
