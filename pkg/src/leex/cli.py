"""Command-line front end: indexing, retrieval stages, pipelines, sweeps.

Exit codes: 0 success, 1 configuration error, 2 runtime error,
3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import STOPWORDS
from .config import PipelineConfig, read_config_file, resolve_config
from .corpus import Corpus
from .errors import ConfigError, LeexError, ValidationError
from .evaluation import evaluate_run, paired_t_test, write_report
from .expand import (
    DOCUMENT,
    build_feedback,
    duet_retrieve,
    read_weighted_query,
    write_weighted_query,
)
from .index import kernel_name
from .indexset import IndexSet, build_index_set, load_index_set, save_index_set
from .pipelines import (
    expansion_queries,
    initial_retrieval,
    run_pipeline,
    scorer_for,
)
from .rerank import rerank_run
from .run import ScoredRun, max_normalize
from .sweep import default_grids, grid_size, sweep
from .trec import (
    read_folds,
    read_qrels,
    read_run,
    read_topics,
    validate_run_file,
    write_run,
)

log = logging.getLogger(__name__)

# flag destination → flat config key
FLAG_KEYS = {
    "pipeline": "pipeline.kind",
    "corpus": "pipeline.corpus",
    "topics": "pipeline.topics",
    "index_root": "pipeline.index_root",
    "output_dir": "pipeline.output_dir",
    "qrels": "pipeline.qrels",
    "folds": "pipeline.folds",
    "depth": "pipeline.depth",
    "run_depth": "pipeline.run_depth",
    "window": "pipeline.window",
    "stride": "pipeline.stride",
    "scorer": "scorer.spec",
    "batch_size": "scorer.batch_size",
    "timeout": "scorer.timeout",
    "retries": "scorer.retries",
    "k1": "bm25.k1",
    "b": "bm25.b",
    "fb_docs": "expansion.fb_docs",
    "fb_terms": "expansion.fb_terms",
    "w0": "expansion.original_query_weight",
    "beta": "expansion.beta",
    "lambda_": "expansion.lambda",
    "k_lee": "expansion.k_lee",
    "unit_kind": "expansion.unit_kind",
    "use_idf_factor": "expansion.use_idf_factor",
    "use_entity_pairs": "expansion.use_entity_pairs",
    "budget": "adaptive.budget",
    "batch": "adaptive.batch",
    "frontier_mode": "adaptive.frontier_mode",
    "gar_n_terms": "adaptive.gar_n_terms",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key, e.g. --set expansion.beta=0.7",
    )
    grp = parser.add_argument_group("config overrides")
    grp.add_argument("--pipeline", choices=["traditional", "nlm-feedback", "nlm-feedback-rerank", "adaptive"])
    grp.add_argument("--corpus")
    grp.add_argument("--topics")
    grp.add_argument("--index-root", dest="index_root")
    grp.add_argument("--output-dir", dest="output_dir")
    grp.add_argument("--qrels")
    grp.add_argument("--folds")
    grp.add_argument("--depth")
    grp.add_argument("--run-depth", dest="run_depth")
    grp.add_argument("--window")
    grp.add_argument("--stride")
    grp.add_argument("--scorer", help="lexical | oracle[:qrels] | identity | subprocess:<cmd> | http[:url]")
    grp.add_argument("--batch-size", dest="batch_size")
    grp.add_argument("--timeout")
    grp.add_argument("--retries")
    grp.add_argument("--k1")
    grp.add_argument("--b")
    grp.add_argument("--fb-docs", dest="fb_docs")
    grp.add_argument("--fb-terms", dest="fb_terms")
    grp.add_argument("--w0", dest="w0", help="original query interpolation weight")
    grp.add_argument("--beta")
    grp.add_argument("--lambda", dest="lambda_", help="word/entity fusion weight")
    grp.add_argument("--k-lee", dest="k_lee")
    grp.add_argument("--unit-kind", dest="unit_kind", choices=["document", "passage"])
    grp.add_argument("--use-idf-factor", dest="use_idf_factor", choices=["true", "false"])
    grp.add_argument("--use-entity-pairs", dest="use_entity_pairs", choices=["true", "false"])
    grp.add_argument("--budget")
    grp.add_argument("--batch")
    grp.add_argument("--frontier-mode", dest="frontier_mode", choices=["lee", "gar-bm25", "gar-entity"])
    grp.add_argument("--gar-n-terms", dest="gar_n_terms")


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    file_values = read_config_file(args.config) if args.config else {}
    overrides: dict[str, str] = {}
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = str(value)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set needs KEY=VALUE, got {item!r}")
        overrides[key] = value
    return resolve_config(file_values, overrides)


def _need(config: PipelineConfig, *fields: str) -> None:
    for name in fields:
        if not getattr(config, name):
            raise ConfigError(f"missing required setting: {name}")


def _load_corpus(config: PipelineConfig) -> Corpus:
    _need(config, "corpus")
    return Corpus.load(config.corpus, window=config.window, stride=config.stride)


def _load_indexes(config: PipelineConfig, corpus: Corpus | None) -> IndexSet:
    if config.index_root:
        return load_index_set(config.index_root)
    if corpus is None:
        raise ConfigError("need either index_root or corpus")
    return build_index_set(corpus)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_index(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    _need(config, "corpus")
    if not args.out:
        raise ConfigError("index: --out directory required")
    corpus = _load_corpus(config)
    indexes = build_index_set(corpus)
    save_index_set(indexes, args.out)
    print(
        f"indexed {len(corpus)} docs: "
        f"{indexes.doc_words.n_units} doc units, "
        f"{indexes.passage_words.n_units} passages -> {args.out}"
    )
    return 0


def cmd_shard(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load_corpus(config)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for doc_id in sorted(corpus.docs):
            for p in corpus.passages(doc_id):
                record = {
                    "pid": p.passage_id,
                    "doc_id": p.doc_id,
                    "sentences": list(p.sentence_range),
                    "text": p.text,
                    "entities": [m.entity_id for m in p.mentions],
                }
                out.write(json.dumps(record) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    _need(config, "topics")
    corpus = _load_corpus(config) if config.corpus else None
    indexes = _load_indexes(config, corpus)
    topics = read_topics(config.topics)
    run = initial_retrieval(topics, indexes, config)
    out = Path(args.out or Path(config.output_dir) / "search.run")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_run(run, out, tag="bm25", config_hash=config.config_hash)
    print(f"wrote {out} ({len(run)} queries)")
    return 0


def cmd_rerank(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    _need(config, "topics")
    corpus = _load_corpus(config)
    run = read_run(args.run)
    topics = read_topics(config.topics)
    texts = {q.query_id: q.text for q in topics}
    scorer = scorer_for(config, run)
    try:
        reranked, _table = rerank_run(
            run, corpus, scorer, config.depth, texts, config.batch_size
        )
    finally:
        scorer.close()
    out = Path(args.out or Path(config.output_dir) / "rerank.run")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_run(reranked, out, tag=f"rerank-{scorer.name}", config_hash=config.config_hash)
    print(f"wrote {out} ({len(reranked)} queries)")
    return 0


def cmd_expand(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    _need(config, "topics")
    corpus = _load_corpus(config) if config.corpus else None
    indexes = _load_indexes(config, corpus)
    topics = {q.query_id: q for q in read_topics(config.topics)}
    run = read_run(args.run)
    out_dir = Path(args.out or Path(config.output_dir) / "queries")
    out_dir.mkdir(parents=True, exist_ok=True)
    exp = config.expansion
    written = 0
    for qid in run.qids:
        if qid not in topics:
            log.warning("run query %s not in topics; skipped", qid)
            continue
        feedback = build_feedback(
            max_normalize(run.entries(qid)), exp.fb_docs, DOCUMENT, run.name
        )
        queries = expansion_queries(topics[qid], feedback, indexes, exp)
        write_weighted_query(out_dir / f"{qid}.word.tsv", queries.word, config.config_hash)
        if queries.entity is not None:
            write_weighted_query(
                out_dir / f"{qid}.entity.tsv", queries.entity, config.config_hash
            )
        written += 1
    print(f"wrote expanded queries for {written} topics -> {out_dir}")
    return 0


def cmd_duet(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load_corpus(config) if config.corpus else None
    indexes = _load_indexes(config, corpus)
    queries_dir = Path(args.queries)
    word_files = sorted(queries_dir.glob("*.word.tsv"))
    if not word_files:
        raise ConfigError(f"no *.word.tsv files under {queries_dir}")
    exp = config.expansion
    run = ScoredRun("duet")
    for wf in word_files:
        qid = wf.name[: -len(".word.tsv")]
        word_query = read_weighted_query(wf)
        ef = queries_dir / f"{qid}.entity.tsv"
        entity_query = read_weighted_query(ef) if ef.exists() else None
        result = duet_retrieve(
            word_query,
            entity_query,
            indexes.doc_words,
            indexes.doc_entities,
            exp.lambda_,
            exp.k_lee,
            run_depth=config.run_depth,
            k1=config.k1,
            b=config.b,
        )
        run.set_entries(qid, result.entries)
    out = Path(args.out or Path(config.output_dir) / "duet.run")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_run(run, out, tag="duet", config_hash=config.config_hash)
    print(f"wrote {out} ({len(run)} queries)")
    return 0


def _run_configured_pipeline(config: PipelineConfig) -> int:
    _need(config, "corpus", "topics")
    corpus = _load_corpus(config)
    indexes = _load_indexes(config, corpus)
    topics = read_topics(config.topics)
    result = run_pipeline(config, corpus, indexes, topics, output_dir=config.output_dir)
    for path in result.run_paths:
        print(f"stage run: {path}")
    print(f"stats: {result.stats_path}")
    print(f"final run: {result.run_paths[-1]}")
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    return _run_configured_pipeline(_config_from_args(args))


def cmd_adaptive(args: argparse.Namespace) -> int:
    args.pipeline = "adaptive"
    return _run_configured_pipeline(_config_from_args(args))


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    _need(config, "qrels")
    qrels = read_qrels(config.qrels)
    measures = tuple(m.strip() for m in args.measures.split(",") if m.strip())
    run = read_run(args.run)
    report = evaluate_run(run, qrels, measures, depth=config.depth)
    if args.out:
        write_report(report, args.out)
        print(f"wrote {args.out}")
    else:
        for m in measures:
            print(f"{m}\tall\t{report.aggregate[m]:.6f}")
    if args.compare:
        other = evaluate_run(read_run(args.compare), qrels, measures, depth=config.depth)
        for m in measures:
            a, b = report.values(m), other.values(m)
            common = sorted(set(a) & set(b))
            if len(common) < 2:
                print(f"{m}\tt-test\tskipped (fewer than 2 common queries)")
                continue
            res = paired_t_test({q: a[q] for q in common}, {q: b[q] for q in common})
            verdict = "significant" if res.significant else "not-significant"
            print(f"{m}\tt-test\tt={res.t:.4f}\tp={res.p:.4f}\t{verdict}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    _need(config, "corpus", "topics", "qrels", "folds")
    grids = default_grids()
    for item in args.grid:
        key, sep, values = item.partition("=")
        if not sep or not values:
            raise ConfigError(f"--grid needs KEY=V1,V2,..., got {item!r}")
        grids[key] = values.split(",")
    if args.count_only:
        print(f"grid points: {grid_size(grids)}")
        return 0
    corpus = _load_corpus(config)
    indexes = _load_indexes(config, corpus)
    topics = read_topics(config.topics)
    qrels = read_qrels(config.qrels)
    folds = read_folds(config.folds)
    report = sweep(
        config,
        grids,
        folds,
        corpus,
        indexes,
        topics,
        qrels,
        measure=args.measure,
        full_grid=args.full_grid,
        rounds=args.rounds,
        workers=args.workers,
    )
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_path = out_dir / "sweep-test.run"
    write_run(report.test_run, run_path, tag="sweep", config_hash=config.config_hash)
    payload = {
        "measure": report.measure,
        "aggregate": report.aggregate,
        "folds": [
            {
                "fold_id": f.fold_id,
                "train_qids": f.train_qids,
                "selection": f.selection,
                "train_score": f.train_score,
                "points_evaluated": f.points_evaluated,
                "failed_points": f.failed_points,
                "test_per_query": f.test_per_query,
            }
            for f in report.folds
        ],
    }
    report_path = out_dir / "sweep.json"
    report_path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
    for f in report.folds:
        print(f"fold {f.fold_id}: train {report.measure}={f.train_score:.4f} {f.selection}")
    print(f"test {report.measure}={report.aggregate:.4f}")
    print(f"wrote {report_path} and {run_path}")
    return 0


def cmd_validate_run(args: argparse.Namespace) -> int:
    depth = int(args.depth) if args.depth else None
    rows = validate_run_file(args.run, depth=depth)
    print(f"OK: {args.run} ({rows} rows)")
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leex",
        description="Hybrid word-entity query expansion over re-ranked feedback.",
    )
    parser.add_argument("--version", action="version", version=f"leex {__version__}")
    parser.add_argument(
        "--print-stopwords", action="store_true", help="print the stopword list and exit"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    def add(name: str, help_text: str, func) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        p.set_defaults(func=func)
        return p

    p = add("index", "build and persist the four indexes", cmd_index)
    p.add_argument("--out", required=True, help="index directory to create")

    p = add("shard", "emit passage shards as JSONL", cmd_shard)
    p.add_argument("--out", help="output file (default stdout)")

    p = add("search", "initial BM25 retrieval over documents", cmd_search)
    p.add_argument("--out", help="output run file")

    p = add("rerank", "re-score a run's top depth by max-passage", cmd_rerank)
    p.add_argument("--run", required=True, help="input run file")
    p.add_argument("--out", help="output run file")

    p = add("expand", "build expanded queries from a feedback run", cmd_expand)
    p.add_argument("--run", required=True, help="feedback run file")
    p.add_argument("--out", help="output directory for query files")

    p = add("duet", "execute word+entity expanded queries and fuse", cmd_duet)
    p.add_argument("--queries", required=True, help="directory of expanded query files")
    p.add_argument("--out", help="output run file")

    add("adaptive", "adaptive expansion pipeline", cmd_adaptive)
    add("pipeline", "run the configured pipeline end to end", cmd_pipeline)

    p = add("evaluate", "score a run against qrels", cmd_evaluate)
    p.add_argument("--run", required=True)
    p.add_argument("--measures", default="map,ndcg,recall@1000")
    p.add_argument("--out", help="write a TSV report instead of printing")
    p.add_argument("--compare", help="second run for a paired t-test")

    p = add("sweep", "hyperparameter search with CV folds", cmd_sweep)
    p.add_argument("--measure", default="recall@1000")
    p.add_argument("--full-grid", action="store_true", dest="full_grid")
    p.add_argument("--rounds", type=int, default=2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2,...")
    p.add_argument("--count-only", action="store_true", dest="count_only")

    p = sub.add_parser("validate-run", help="check TREC run format invariants")
    p.add_argument("--run", required=True)
    p.add_argument("--depth")
    p.set_defaults(func=cmd_validate_run)

    p = sub.add_parser("info", help="print version and kernel selection")
    p.set_defaults(func=cmd_info)
    return parser


def cmd_info(args: argparse.Namespace) -> int:
    print(f"leex {__version__}")
    print(f"bm25 kernel: {kernel_name()}")
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.print_stopwords:
        for word in sorted(STOPWORDS):
            print(word)
        return 0
    if not args.command:
        build_parser().print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 3
    except LeexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
