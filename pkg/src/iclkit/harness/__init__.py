"""Experiment orchestration: config, runner, annotation batches, service, export."""

from .annotation import AnnotationTask, ingest_judgments, make_annotation_batch
from .config import (
    AnnotatorConfig,
    DatasetConfig,
    EmbedderConfig,
    ExperimentConfig,
    LlmConfig,
    config_digest,
    load_config,
)
from .export import export
from .runner import RunSummary, run_experiment

__all__ = [
    "AnnotationTask",
    "AnnotatorConfig",
    "DatasetConfig",
    "EmbedderConfig",
    "ExperimentConfig",
    "LlmConfig",
    "RunSummary",
    "config_digest",
    "export",
    "ingest_judgments",
    "load_config",
    "make_annotation_batch",
    "run_experiment",
]
