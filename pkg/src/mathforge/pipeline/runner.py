"""Staged execution with checkpointing and resume.

A run owns one directory: the normalized config, the manifest, and one
JSONL artifact per completed stage. Completed stages are never re-executed
unless forced; on resume every committed artifact is re-hashed before new
work starts, so silently edited outputs cannot poison downstream stages.
"""

from __future__ import annotations

import json
import time
import uuid
from pathlib import Path

from ..backends import Backend
from ..errors import ConfigError, StageFailed, UpstreamIncomplete
from ..textutil import derive_seed
from .artifacts import write_bytes_atomic, write_jsonl
from .config import PipelineConfig, build_backends, parse_config
from .manifest import (
    STAGES,
    STATUS_COMPLETE,
    STATUS_FAILED,
    RunManifest,
    StageCheckpoint,
)
from .stages import STAGE_FUNCTIONS, StageContext, StageOutput, stage_overlap

MANIFEST_NAME = "manifest.json"
CONFIG_NAME = "config.json"


class PipelineRunner:
    def __init__(self, run_dir: Path, config: PipelineConfig, manifest: RunManifest):
        self.run_dir = Path(run_dir)
        self.config = config
        self.manifest = manifest
        self._backends: dict[str, Backend] | None = None

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def create(
        cls,
        workspace: str | Path,
        config: PipelineConfig,
        run_id: str | None = None,
    ) -> "PipelineRunner":
        run_id = run_id or f"run-{uuid.uuid4().hex[:12]}"
        run_dir = Path(workspace) / run_id
        if (run_dir / MANIFEST_NAME).exists():
            raise ConfigError(f"run {run_id!r} already exists in {workspace}")
        run_dir.mkdir(parents=True, exist_ok=True)
        payload = json.dumps(config.to_canonical_dict(), indent=2, sort_keys=True)
        write_bytes_atomic(run_dir / CONFIG_NAME, payload.encode("utf-8"))
        manifest = RunManifest(
            run_id=run_id, config_hash=config.config_hash, seed=config.seed
        )
        manifest.save(run_dir / MANIFEST_NAME)
        return cls(run_dir, config, manifest)

    @classmethod
    def load(cls, workspace: str | Path, run_id: str) -> "PipelineRunner":
        run_dir = Path(workspace) / run_id
        manifest = RunManifest.load(run_dir / MANIFEST_NAME)
        config_path = run_dir / CONFIG_NAME
        if not config_path.is_file():
            raise StageFailed(f"run {run_id!r} has no stored config")
        config = parse_config(json.loads(config_path.read_text(encoding="utf-8")))
        if config.config_hash != manifest.config_hash:
            raise StageFailed(
                f"run {run_id!r}: stored config hash does not match manifest"
            )
        return cls(run_dir, config, manifest)

    @property
    def backends(self) -> dict[str, Backend]:
        if self._backends is None:
            self._backends = build_backends(self.config)
        return self._backends

    def _context(self, stage: str) -> StageContext:
        return StageContext(
            config=self.config,
            run_dir=self.run_dir,
            backends=self.backends,
            base_seed=derive_seed(self.config.seed, "stage", stage),
        )

    # -- execution ---------------------------------------------------------

    def run_stage(
        self,
        stage: str,
        *,
        force: bool = False,
        corpus_path: str | None = None,
    ) -> StageCheckpoint:
        if stage not in STAGES:
            raise StageFailed(f"unknown stage {stage!r} (expected one of {STAGES})")
        checkpoint = self.manifest.checkpoint(stage)
        incomplete = [
            name
            for name in self.manifest.upstream_of(stage)
            if self.manifest.checkpoint(name).status != STATUS_COMPLETE
        ]
        if incomplete:
            raise UpstreamIncomplete(
                f"stage {stage!r} requires completed upstream stages; "
                f"missing: {incomplete}"
            )
        self.manifest.verify_integrity(self.run_dir)
        if checkpoint.status == STATUS_COMPLETE and not force:
            return checkpoint

        started = time.monotonic()
        try:
            if stage == "overlap":
                output: StageOutput = stage_overlap(self._context(stage), corpus_path)
            else:
                output = STAGE_FUNCTIONS[stage](self._context(stage))
        except Exception as exc:
            checkpoint.status = STATUS_FAILED
            checkpoint.stats = {"error": str(exc)}
            checkpoint.wall_time = time.monotonic() - started
            self.manifest.save(self.run_dir / MANIFEST_NAME)
            if isinstance(exc, StageFailed):
                raise
            raise StageFailed(f"{stage}: {exc}") from exc

        output_name = f"{stage}.jsonl"
        content_hash = write_jsonl(self.run_dir / output_name, output.schema, output.records)
        aux_entries = {}
        for name, (schema, records) in output.aux.items():
            aux_name = f"{stage}_{name}.jsonl"
            aux_hash = write_jsonl(self.run_dir / aux_name, schema, records)
            aux_entries[name] = {"path": aux_name, "content_hash": aux_hash}

        checkpoint.status = STATUS_COMPLETE
        checkpoint.output_path = output_name
        checkpoint.content_hash = content_hash
        checkpoint.wall_time = time.monotonic() - started
        checkpoint.stats = output.stats
        checkpoint.aux = aux_entries
        self.manifest.save(self.run_dir / MANIFEST_NAME)
        return checkpoint

    def runnable_stages(self) -> list[str]:
        """All stages `execute` covers; overlap needs a configured corpus."""
        stages = list(STAGES)
        if not self.config.overlap_corpus:
            stages.remove("overlap")
        return stages

    def execute(self, until: str | None = None, force: bool = False) -> RunManifest:
        """Run every runnable stage in order, skipping completed ones."""
        if until is not None and until not in STAGES:
            raise StageFailed(f"unknown stage {until!r}")
        for stage in self.runnable_stages():
            self.run_stage(stage, force=force)
            if stage == until:
                break
        return self.manifest

    def report(self) -> list[dict]:
        rows = []
        for stage in STAGES:
            cp = self.manifest.checkpoint(stage)
            rows.append(
                {
                    "stage": stage,
                    "status": cp.status,
                    "records": _record_count(cp),
                    "wall_time": cp.wall_time,
                    "content_hash": cp.content_hash,
                    "stats": cp.stats,
                }
            )
        return rows


def _record_count(checkpoint: StageCheckpoint) -> int | None:
    stats = checkpoint.stats
    for key in ("records", "answers", "battles", "golds", "pairs_total", "selected", "kept", "problems"):
        if key in stats:
            return stats[key]
    return None
