"""Budgeted novel-intent discovery over fixed sentence embeddings."""

from .config import RunConfig
from .core import BudgetLedger, ClassVocabulary, LabeledPool, OracleHandle
from .discovery import StrategyVariant, run_mnid
from .evaluation import PipelineReport, report_json
from .ingest import (
    Corpus,
    EmbeddingMatrix,
    SyntheticSpec,
    generate_synthetic,
    load_corpus,
    load_embeddings,
    write_corpus,
    write_embeddings,
)

__all__ = [
    "BudgetLedger",
    "ClassVocabulary",
    "Corpus",
    "EmbeddingMatrix",
    "LabeledPool",
    "OracleHandle",
    "PipelineReport",
    "RunConfig",
    "StrategyVariant",
    "SyntheticSpec",
    "generate_synthetic",
    "load_corpus",
    "load_embeddings",
    "report_json",
    "run_mnid",
    "write_corpus",
    "write_embeddings",
]

__version__ = "0.1.0"
