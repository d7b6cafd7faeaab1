"""leex: hybrid word-entity query expansion over re-ranked feedback.

Retrieval toolkit pairing BM25 inverted indexes (word and entity
vocabularies, documents and passages) with relevance-model expansion from
neural-reranker feedback, duet fusion of the two expanded queries, and an
adaptive loop that refreshes its candidate frontier as scoring evidence
accumulates.
"""

__version__ = "0.1.0"

from .adaptive import AdaptiveStats, adaptive_expand, gar_frontier_query
from .analysis import STOPWORDS, analyze_text, porter_stem, tokenize
from .config import PipelineConfig, resolve_config
from .corpus import (
    Corpus,
    Document,
    EntityMention,
    Passage,
    Query,
    load_corpus,
    shard_passages,
    split_sentences,
)
from .errors import (
    ConfigError,
    DegenerateModelError,
    LeexError,
    ScorerError,
    ValidationError,
)
from .evaluation import EvalReport, evaluate_run, paired_t_test
from .expand import (
    ExpansionConfig,
    FeedbackSet,
    RelevanceModel,
    build_feedback,
    duet_retrieve,
    entity_pair_model,
    entity_relevance_model,
    make_expanded_query,
    word_relevance_model,
)
from .index import (
    InvertedIndex,
    WeightedQuery,
    bm25_search,
    build_index,
    kernel_name,
    load_index,
    save_index,
)
from .indexset import IndexSet, build_index_set, load_index_set, save_index_set
from .pipelines import PipelineResult, run_pipeline
from .rerank import PassageScoreTable, rerank_run
from .run import RunEntry, ScoredRun, max_normalize, min_max_normalize
from .scorers import (
    HTTPScorer,
    IdentityScorer,
    LexicalScorer,
    QrelsOracleScorer,
    Scorer,
    SubprocessScorer,
    make_scorer,
)
from .sweep import default_grids, enumerate_grid, grid_size, sweep
from .trec import (
    read_folds,
    read_qrels,
    read_run,
    read_topics,
    validate_run_file,
    write_run,
)
