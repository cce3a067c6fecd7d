"""Run manifest: stage checkpoints with content hashes for resumability."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import StageFailed
from .artifacts import file_hash, write_bytes_atomic

STAGES = (
    "synthesize",
    "filter",
    "select",
    "answer",
    "battle",
    "gold",
    "pairs",
    "losscheck",
    "overlap",
)

STATUS_PENDING = "pending"
STATUS_COMPLETE = "complete"
STATUS_FAILED = "failed"


@dataclass
class StageCheckpoint:
    status: str = STATUS_PENDING
    output_path: str | None = None
    content_hash: str | None = None
    wall_time: float | None = None
    stats: dict = field(default_factory=dict)
    aux: dict[str, dict] = field(default_factory=dict)  # name -> {path, content_hash}

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "output_path": self.output_path,
            "content_hash": self.content_hash,
            "wall_time": self.wall_time,
            "stats": self.stats,
            "aux": self.aux,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StageCheckpoint":
        return cls(
            status=data.get("status", STATUS_PENDING),
            output_path=data.get("output_path"),
            content_hash=data.get("content_hash"),
            wall_time=data.get("wall_time"),
            stats=data.get("stats", {}),
            aux=data.get("aux", {}),
        )


@dataclass
class RunManifest:
    run_id: str
    config_hash: str
    seed: int
    stages: dict[str, StageCheckpoint] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for stage in STAGES:
            self.stages.setdefault(stage, StageCheckpoint())

    def checkpoint(self, stage: str) -> StageCheckpoint:
        if stage not in self.stages:
            raise StageFailed(f"unknown stage {stage!r}")
        return self.stages[stage]

    def upstream_of(self, stage: str) -> list[str]:
        return list(STAGES[: STAGES.index(stage)])

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "stages": {name: cp.to_dict() for name, cp in self.stages.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        return cls(
            run_id=data["run_id"],
            config_hash=data["config_hash"],
            seed=data["seed"],
            stages={
                name: StageCheckpoint.from_dict(cp)
                for name, cp in data.get("stages", {}).items()
            },
        )

    def save(self, path: Path) -> None:
        payload = json.dumps(self.to_dict(), indent=2, sort_keys=True).encode("utf-8")
        write_bytes_atomic(path, payload)

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        if not Path(path).is_file():
            raise StageFailed(f"manifest not found: {path}")
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def verify_integrity(self, run_dir: Path) -> None:
        """Recompute hashes of completed artifacts; mismatch aborts the run."""
        for name, cp in self.stages.items():
            if cp.status != STATUS_COMPLETE:
                continue
            targets = []
            if cp.output_path:
                targets.append((cp.output_path, cp.content_hash))
            for aux in cp.aux.values():
                targets.append((aux["path"], aux["content_hash"]))
            for rel_path, expected in targets:
                full = run_dir / rel_path
                if not full.is_file():
                    raise StageFailed(f"{name}: artifact missing on resume: {rel_path}")
                actual = file_hash(full)
                if actual != expected:
                    raise StageFailed(
                        f"{name}: artifact {rel_path} changed since checkpoint "
                        f"(expected {expected[:12]}, got {actual[:12]})"
                    )
