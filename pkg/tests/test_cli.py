import json

import pytest

from leex.cli import main
from leex.index import kernel_name
from leex.trec import validate_run_file

from test_pipelines import jdoc


@pytest.fixture(scope="module")
def cli_world(tmp_path_factory):
    """On-disk inputs for CLI runs: corpus, topics, qrels, folds, index."""
    root = tmp_path_factory.mktemp("cli_world")
    docs = [jdoc(f"GA{i}", "gamma delta signal", []) for i in (1, 2, 3)]
    docs += [jdoc(f"GX{i}", "gamma noise static", ["E5"]) for i in (1, 2, 3)]
    docs += [jdoc(f"HB{i}", "epsilon report finding", ["E7"]) for i in (1, 2, 3)]
    docs += [jdoc(f"HX{i}", "epsilon zeta chatter racket", []) for i in (1, 2, 3)]
    docs += [jdoc(f"F{i}", "mundane filler prose entirely", []) for i in range(1, 6)]
    paths = {
        "corpus": root / "corpus.jsonl",
        "topics": root / "topics.tsv",
        "qrels": root / "qrels.txt",
        "folds": root / "folds.json",
        "index_root": root / "indexes",
    }
    paths["corpus"].write_text("\n".join(json.dumps(d) for d in docs) + "\n")
    paths["topics"].write_text("qA\tgamma delta\tE5\nqB\tepsilon zeta\tE7\n")
    qlines = [f"qA 0 GA{i} 1" for i in (1, 2, 3)] + [f"qA 0 GX{i} 0" for i in (1, 2, 3)]
    qlines += [f"qB 0 HB{i} 1" for i in (1, 2, 3)] + [f"qB 0 HX{i} 0" for i in (1, 2, 3)]
    paths["qrels"].write_text("\n".join(qlines) + "\n")
    paths["folds"].write_text(
        json.dumps({"fA": {"train": ["qA"], "test": ["qB"]},
                    "fB": {"train": ["qB"], "test": ["qA"]}})
    )
    assert main(["index", "--corpus", str(paths["corpus"]), "--out", str(paths["index_root"])]) == 0
    return {k: str(v) for k, v in paths.items()}


def make_search_run(cli_world, tmp_path):
    out = tmp_path / "search.run"
    code = main([
        "search", "--index-root", cli_world["index_root"],
        "--topics", cli_world["topics"], "--out", str(out),
    ])
    assert code == 0
    return out


def test_info_reports_kernel(capsys):
    assert main(["info"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("leex ")
    assert f"bm25 kernel: {kernel_name()}" in out
    assert kernel_name() in ("cython", "numpy")


def test_print_stopwords(capsys):
    assert main(["--print-stopwords"]) == 0
    words = capsys.readouterr().out.split()
    assert len(words) == 33
    assert "the" in words and words == sorted(words)


def test_version_and_no_command(capsys):
    assert main(["--version"]) == 0
    assert main([]) == 1


def test_index_output_summary(cli_world, capsys):
    capsys.readouterr()
    code = main(["index", "--corpus", cli_world["corpus"], "--out", cli_world["index_root"]])
    assert code == 0
    assert "17 docs" in capsys.readouterr().out


def test_shard_emits_passage_records(cli_world, tmp_path, capsys):
    out = tmp_path / "shards.jsonl"
    assert main(["shard", "--corpus", cli_world["corpus"], "--out", str(out)]) == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 17  # short docs shard to one passage each
    first = records[0]
    assert set(first) == {"pid", "doc_id", "sentences", "text", "entities"}
    assert first["pid"] == f"{first['doc_id']}#p0"


def test_search_writes_valid_run(cli_world, tmp_path):
    out = make_search_run(cli_world, tmp_path)
    assert validate_run_file(out) > 0
    assert out.read_text().startswith("# config_hash=")


def test_rerank_command(cli_world, tmp_path):
    run = make_search_run(cli_world, tmp_path)
    out = tmp_path / "rerank.run"
    code = main([
        "rerank", "--corpus", cli_world["corpus"], "--topics", cli_world["topics"],
        "--run", str(run), "--scorer", "oracle", "--qrels", cli_world["qrels"],
        "--out", str(out),
    ])
    assert code == 0
    assert validate_run_file(out) > 0


def test_expand_then_duet(cli_world, tmp_path):
    run = make_search_run(cli_world, tmp_path)
    qdir = tmp_path / "queries"
    code = main([
        "expand", "--index-root", cli_world["index_root"],
        "--topics", cli_world["topics"], "--run", str(run), "--out", str(qdir),
    ])
    assert code == 0
    assert (qdir / "qA.word.tsv").exists() and (qdir / "qB.word.tsv").exists()
    out = tmp_path / "duet.run"
    code = main([
        "duet", "--index-root", cli_world["index_root"],
        "--queries", str(qdir), "--out", str(out),
    ])
    assert code == 0
    assert validate_run_file(out) > 0


def test_pipeline_command_emits_stage_files(cli_world, tmp_path):
    out_dir = tmp_path / "out"
    code = main([
        "pipeline", "--pipeline", "nlm-feedback", "--scorer", "identity",
        "--corpus", cli_world["corpus"], "--topics", cli_world["topics"],
        "--output-dir", str(out_dir), "--run-depth", "10", "--k-lee", "10",
    ])
    assert code == 0
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == [
        "00-bm25.run", "01-rerank-feedback.run", "02-duet.run", "stats.jsonl",
    ]
    for name in names[:3]:
        assert validate_run_file(out_dir / name) > 0


def test_adaptive_command(cli_world, tmp_path):
    out_dir = tmp_path / "out"
    code = main([
        "adaptive", "--scorer", "oracle", "--qrels", cli_world["qrels"],
        "--corpus", cli_world["corpus"], "--topics", cli_world["topics"],
        "--output-dir", str(out_dir), "--run-depth", "10", "--k-lee", "10",
        "--budget", "12", "--batch", "4",
    ])
    assert code == 0
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["00-bm25.run", "01-adaptive.run", "stats.jsonl"]
    rows = [json.loads(line) for line in (out_dir / "stats.jsonl").read_text().splitlines()]
    assert [r["qid"] for r in rows] == ["qA", "qB"]
    assert all("frontier_refreshes" in r for r in rows)


def test_evaluate_prints_aggregates(cli_world, tmp_path, capsys):
    run = make_search_run(cli_world, tmp_path)
    capsys.readouterr()
    code = main([
        "evaluate", "--run", str(run), "--qrels", cli_world["qrels"],
        "--measures", "map,recall@3",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert any(line.startswith("map\tall\t") for line in out.splitlines())
    assert any(line.startswith("recall@3\tall\t") for line in out.splitlines())


def test_evaluate_report_and_self_comparison(cli_world, tmp_path, capsys):
    run = make_search_run(cli_world, tmp_path)
    report = tmp_path / "report.tsv"
    code = main([
        "evaluate", "--run", str(run), "--qrels", cli_world["qrels"],
        "--measures", "map", "--out", str(report), "--compare", str(run),
    ])
    assert code == 0
    assert report.exists()
    out = capsys.readouterr().out
    assert "t=0.0000" in out and "p=1.0000" in out and "not-significant" in out


def test_sweep_count_only(cli_world, capsys):
    code = main([
        "sweep", "--corpus", cli_world["corpus"], "--topics", cli_world["topics"],
        "--qrels", cli_world["qrels"], "--folds", cli_world["folds"],
        "--count-only",
    ])
    assert code == 0
    assert "grid points: 291600" in capsys.readouterr().out


def test_sweep_small_grid(cli_world, tmp_path, capsys):
    out_dir = tmp_path / "sweep_out"
    argv = [
        "sweep", "--corpus", cli_world["corpus"], "--topics", cli_world["topics"],
        "--qrels", cli_world["qrels"], "--folds", cli_world["folds"],
        "--pipeline", "nlm-feedback", "--scorer", "identity",
        "--run-depth", "10", "--measure", "recall@3",
        "--output-dir", str(out_dir),
    ]
    for axis in ("fb_docs=8", "fb_terms=10", "original_query_weight=0.5",
                 "beta=0.5", "lambda=0.0,1.0", "k_lee=10"):
        argv += ["--grid", f"expansion.{axis}"]
    assert main(argv) == 0
    payload = json.loads((out_dir / "sweep.json").read_text())
    selections = {f["fold_id"]: f["selection"]["expansion.lambda"] for f in payload["folds"]}
    assert selections == {"fA": "1.0", "fB": "0.0"}
    assert validate_run_file(out_dir / "sweep-test.run") > 0


def test_exit_codes(cli_world, tmp_path, capsys):
    # 1: configuration errors
    assert main(["pipeline", "--set", "bogus.key=1"]) == 1
    assert main(["pipeline", "--set", "malformed"]) == 1
    assert main(["index", "--corpus", cli_world["corpus"]]) == 1  # missing --out
    # 2: runtime error (unreadable input)
    assert main(["evaluate", "--run", str(tmp_path / "ghost.run"),
                 "--qrels", cli_world["qrels"]]) == 2
    # 3: validation failure
    bad = tmp_path / "bad.run"
    bad.write_text("qA Q0 d1 5 1.0 tag\n")
    assert main(["validate-run", "--run", str(bad)]) == 3
    good = tmp_path / "good.run"
    good.write_text("qA Q0 d1 1 1.0 tag\n")
    assert main(["validate-run", "--run", str(good)]) == 0
