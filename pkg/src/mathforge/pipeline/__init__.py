"""Orchestration: configuration, staged execution, persistence, resume."""

from .artifacts import file_hash, read_jsonl, write_jsonl
from .config import (
    BackendSpec,
    PipelineConfig,
    RatingSettings,
    SynthesisSettings,
    Thresholds,
    build_backends,
    load_config,
    parse_config,
)
from .manifest import STAGES, RunManifest, StageCheckpoint
from .overlap import OverlapReport, corpus_overlap
from .runner import PipelineRunner
from .stages import build_loss_fixtures, verify_loss_fixtures

__all__ = [
    "BackendSpec",
    "OverlapReport",
    "PipelineConfig",
    "PipelineRunner",
    "RatingSettings",
    "RunManifest",
    "STAGES",
    "StageCheckpoint",
    "SynthesisSettings",
    "Thresholds",
    "build_backends",
    "build_loss_fixtures",
    "corpus_overlap",
    "file_hash",
    "load_config",
    "parse_config",
    "read_jsonl",
    "verify_loss_fixtures",
    "write_jsonl",
]
