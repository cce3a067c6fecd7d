"""Request/response models for the HTTP API."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class StageInfo(BaseModel):
    status: str
    output_path: Optional[str] = None
    content_hash: Optional[str] = None
    wall_time: Optional[float] = None
    stats: dict[str, Any] = Field(default_factory=dict)
    aux: dict[str, dict[str, str]] = Field(default_factory=dict)


class RunCreateRequest(BaseModel):
    config: dict[str, Any]
    run_id: Optional[str] = None


class RunView(BaseModel):
    run_id: str
    config_hash: str
    seed: int
    stages: dict[str, StageInfo]


class StageRunRequest(BaseModel):
    force: bool = False
    corpus_path: Optional[str] = None  # overlap only


class ExecuteRequest(BaseModel):
    until: Optional[str] = None
    force: bool = False


class ReportRow(BaseModel):
    stage: str
    status: str
    records: Optional[int] = None
    wall_time: Optional[float] = None
    content_hash: Optional[str] = None
    stats: dict[str, Any] = Field(default_factory=dict)


class ReportView(BaseModel):
    run_id: str
    rows: list[ReportRow]


class LosscheckRequest(BaseModel):
    fixtures_path: str
    tolerance: float = 1e-9


class LosscheckView(BaseModel):
    n_records: int
    max_abs_diff: float
    passed: bool
    tolerance: float


class HealthView(BaseModel):
    status: str
    version: str
    workspace: str
