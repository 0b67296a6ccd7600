"""Knowledge-graph completion pipeline: ingest triple datasets, sample
entity-neighborhood and relation context per query, verbalize into bounded
text sequences, draw candidates from a pluggable sequence model and compute
filtered ranking metrics."""

from .backends import (
    CandidateSet,
    MockNeighborCopyModel,
    MockUniformModel,
    RemoteModel,
    Sample,
    SequenceModel,
    generate_candidates,
)
from .config import BackendConfig, DatasetPaths, RunConfig, VerbalizerOptions, load_run_config
from .evaluate import Metrics, RankingOutcome, evaluate, filtered_rank, metrics_from_outcomes
from .selector import (
    CardinalityClass,
    ContextBundle,
    SelectorConfig,
    Strategy,
    build_context,
    classify_cardinality,
    query_rng,
    sample_entity_neighborhood,
    sample_relation_context,
)
from .store import (
    KnowledgeGraph,
    Query,
    Triple,
    directed_queries,
    filter_set,
    ingest,
    load_snapshot,
    neighbors,
    save_snapshot,
)
from .verbalize import VerbalizedInput, render_training_pair, training_pairs, verbalize

__version__ = "0.1.0"

__all__ = [
    "CandidateSet",
    "MockNeighborCopyModel",
    "MockUniformModel",
    "RemoteModel",
    "Sample",
    "SequenceModel",
    "generate_candidates",
    "BackendConfig",
    "DatasetPaths",
    "RunConfig",
    "VerbalizerOptions",
    "load_run_config",
    "Metrics",
    "RankingOutcome",
    "evaluate",
    "filtered_rank",
    "metrics_from_outcomes",
    "CardinalityClass",
    "ContextBundle",
    "SelectorConfig",
    "Strategy",
    "build_context",
    "classify_cardinality",
    "query_rng",
    "sample_entity_neighborhood",
    "sample_relation_context",
    "KnowledgeGraph",
    "Query",
    "Triple",
    "directed_queries",
    "filter_set",
    "ingest",
    "load_snapshot",
    "neighbors",
    "save_snapshot",
    "VerbalizedInput",
    "render_training_pair",
    "training_pairs",
    "verbalize",
]
