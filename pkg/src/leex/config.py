"""Pipeline configuration: INI file + flag overrides, canonically hashed.

Every run file records the hash of the fully resolved configuration, so a
run can always be traced back to the exact parameter set that produced it.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ValidationError
from .expand import DOCUMENT, PASSAGE, ExpansionConfig

PIPELINES = ("traditional", "nlm-feedback", "nlm-feedback-rerank", "adaptive")
FRONTIER_MODES = ("lee", "gar-bm25", "gar-entity")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _to_bool(raw: str) -> bool:
    val = raw.strip().lower()
    if val in _TRUE:
        return True
    if val in _FALSE:
        return False
    raise ConfigError(f"bad boolean value {raw!r}")


# flat key → (type caster, default). INI sections map to "section.option".
SCHEMA: dict[str, tuple] = {
    "pipeline.kind": (str, "traditional"),
    "pipeline.corpus": (str, ""),
    "pipeline.topics": (str, ""),
    "pipeline.index_root": (str, ""),
    "pipeline.output_dir": (str, "out"),
    "pipeline.qrels": (str, ""),
    "pipeline.folds": (str, ""),
    "pipeline.depth": (int, 1000),
    "pipeline.run_depth": (int, 1000),
    "pipeline.window": (int, 10),
    "pipeline.stride": (int, 5),
    "scorer.spec": (str, "lexical"),
    "scorer.batch_size": (int, 64),
    "scorer.timeout": (float, 30.0),
    "scorer.retries": (int, 2),
    "bm25.k1": (float, 0.9),
    "bm25.b": (float, 0.4),
    "expansion.fb_docs": (int, 10),
    "expansion.fb_terms": (int, 10),
    "expansion.original_query_weight": (float, 0.5),
    "expansion.beta": (float, 0.5),
    "expansion.lambda": (float, 0.5),
    "expansion.k_lee": (int, 1000),
    "expansion.unit_kind": (str, DOCUMENT),
    "expansion.use_idf_factor": (_to_bool, True),
    "expansion.use_entity_pairs": (_to_bool, True),
    "adaptive.budget": (int, 1000),
    "adaptive.batch": (int, 16),
    "adaptive.frontier_mode": (str, "lee"),
    "adaptive.gar_n_terms": (int, 10),
}


@dataclass(frozen=True)
class PipelineConfig:
    pipeline: str
    corpus: str
    topics: str
    index_root: str
    output_dir: str
    qrels: str
    folds: str
    depth: int
    run_depth: int
    window: int
    stride: int
    scorer: str
    batch_size: int
    timeout: float
    retries: int
    k1: float
    b: float
    expansion: ExpansionConfig
    budget: int
    batch: int
    frontier_mode: str
    gar_n_terms: int
    flat: dict[str, str] = field(default_factory=dict, compare=False)

    @property
    def config_hash(self) -> str:
        return hash_flat(self.flat)


def _canonical(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def hash_flat(flat: dict[str, str]) -> str:
    blob = "\n".join(f"{k}={flat[k]}" for k in sorted(flat))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flatten an INI file into "section.option" keys; unknown keys fail."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"bad config {path}: {exc}") from exc
    flat: dict[str, str] = {}
    for section in parser.sections():
        for option, value in parser.items(section):
            key = f"{section}.{option}"
            if key not in SCHEMA:
                raise ConfigError(f"{path}: unknown config key {key!r}")
            flat[key] = value
    return flat


def resolve_config(
    file_values: dict[str, str] | None = None,
    overrides: dict[str, str] | None = None,
) -> PipelineConfig:
    """Defaults ← config file ← explicit overrides, validated as a whole."""
    resolved: dict[str, str] = {
        key: _canonical(default) for key, (_cast, default) in SCHEMA.items()
    }
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            resolved[key] = str(value)

    typed: dict[str, object] = {}
    for key, raw in resolved.items():
        cast = SCHEMA[key][0]
        try:
            typed[key] = cast(raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"config key {key}: {exc}") from exc
    # re-canonicalize so the hash is independent of input spelling
    flat = {key: _canonical(typed[key]) for key in typed}

    try:
        expansion = ExpansionConfig(
            fb_docs=typed["expansion.fb_docs"],
            fb_terms=typed["expansion.fb_terms"],
            original_query_weight=typed["expansion.original_query_weight"],
            beta=typed["expansion.beta"],
            lambda_=typed["expansion.lambda"],
            k_lee=typed["expansion.k_lee"],
            unit_kind=typed["expansion.unit_kind"],
            use_idf_factor=typed["expansion.use_idf_factor"],
            use_entity_pairs=typed["expansion.use_entity_pairs"],
        )
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc

    config = PipelineConfig(
        pipeline=typed["pipeline.kind"],
        corpus=typed["pipeline.corpus"],
        topics=typed["pipeline.topics"],
        index_root=typed["pipeline.index_root"],
        output_dir=typed["pipeline.output_dir"],
        qrels=typed["pipeline.qrels"],
        folds=typed["pipeline.folds"],
        depth=typed["pipeline.depth"],
        run_depth=typed["pipeline.run_depth"],
        window=typed["pipeline.window"],
        stride=typed["pipeline.stride"],
        scorer=typed["scorer.spec"],
        batch_size=typed["scorer.batch_size"],
        timeout=typed["scorer.timeout"],
        retries=typed["scorer.retries"],
        k1=typed["bm25.k1"],
        b=typed["bm25.b"],
        expansion=expansion,
        budget=typed["adaptive.budget"],
        batch=typed["adaptive.batch"],
        frontier_mode=typed["adaptive.frontier_mode"],
        gar_n_terms=typed["adaptive.gar_n_terms"],
        flat=flat,
    )
    _validate(config)
    return config


def _validate(config: PipelineConfig) -> None:
    if config.pipeline not in PIPELINES:
        raise ConfigError(f"unknown pipeline {config.pipeline!r}; choose from {PIPELINES}")
    if config.frontier_mode not in FRONTIER_MODES:
        raise ConfigError(f"unknown frontier_mode {config.frontier_mode!r}")
    if config.expansion.unit_kind not in (DOCUMENT, PASSAGE):
        raise ConfigError(f"unknown unit_kind {config.expansion.unit_kind!r}")
    if config.depth < 0 or config.run_depth < 1:
        raise ConfigError("depth must be >= 0 and run_depth >= 1")
    if not config.k1 > 0 or not 0.0 <= config.b <= 1.0:
        raise ConfigError(f"bad BM25 parameters k1={config.k1} b={config.b}")
    if config.batch < 1 or config.budget < config.batch:
        raise ConfigError("adaptive needs budget >= batch >= 1")
    if config.batch_size < 1:
        raise ConfigError("scorer batch_size must be >= 1")
    for key in ("corpus", "topics", "index_root", "qrels", "folds"):
        value = getattr(config, key)
        if value and not Path(value).exists():
            raise ConfigError(f"{key} path does not exist: {value}")
