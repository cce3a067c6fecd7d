"""FastAPI service wrapping the pipeline.

Error mapping: configuration problems surface as 400, unknown runs as 404,
stage-ordering violations as 409, and stage failures as 500 with the
`stage_failed` code so the CLI can translate them to exit codes.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import ConfigError, ForgeError, StageFailed, UpstreamIncomplete
from ..pipeline import PipelineRunner, parse_config, verify_loss_fixtures
from ..pipeline.manifest import STAGES
from .schemas import (
    ExecuteRequest,
    HealthView,
    LosscheckRequest,
    LosscheckView,
    ReportRow,
    ReportView,
    RunCreateRequest,
    RunView,
    StageInfo,
    StageRunRequest,
)

DEFAULT_WORKSPACE = "forge_runs"


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


class RunRegistry:
    """Loads runners from the workspace and serializes access per run."""

    def __init__(self, workspace: Path):
        self.workspace = workspace
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def lock(self, run_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(run_id, threading.Lock())

    def load(self, run_id: str) -> PipelineRunner:
        try:
            return PipelineRunner.load(self.workspace, run_id)
        except StageFailed as exc:
            raise _error(404, "run_not_found", str(exc)) from exc
        except ConfigError as exc:
            raise _error(400, "config_error", str(exc)) from exc


def _run_view(runner: PipelineRunner) -> RunView:
    return RunView(
        run_id=runner.manifest.run_id,
        config_hash=runner.manifest.config_hash,
        seed=runner.manifest.seed,
        stages={
            name: StageInfo(**cp.to_dict()) for name, cp in runner.manifest.stages.items()
        },
    )


def create_app(workspace: str | Path = DEFAULT_WORKSPACE) -> FastAPI:
    workspace = Path(workspace)
    workspace.mkdir(parents=True, exist_ok=True)
    registry = RunRegistry(workspace)
    app = FastAPI(title="mathforge", version=__version__)

    @app.get("/health", response_model=HealthView)
    def health() -> HealthView:
        return HealthView(status="ok", version=__version__, workspace=str(workspace))

    @app.post("/runs", response_model=RunView)
    def create_run(request: RunCreateRequest) -> RunView:
        try:
            config = parse_config(request.config)
            runner = PipelineRunner.create(workspace, config, request.run_id)
        except ConfigError as exc:
            raise _error(400, "config_error", str(exc)) from exc
        return _run_view(runner)

    @app.get("/runs/{run_id}", response_model=RunView)
    def get_run(run_id: str) -> RunView:
        return _run_view(registry.load(run_id))

    @app.post("/runs/{run_id}/stages/{stage}", response_model=RunView)
    def run_stage(run_id: str, stage: str, request: StageRunRequest) -> RunView:
        if stage not in STAGES:
            raise _error(400, "config_error", f"unknown stage {stage!r}")
        with registry.lock(run_id):
            runner = registry.load(run_id)
            try:
                runner.run_stage(stage, force=request.force, corpus_path=request.corpus_path)
            except UpstreamIncomplete as exc:
                raise _error(409, "upstream_incomplete", str(exc)) from exc
            except ForgeError as exc:
                raise _error(500, "stage_failed", str(exc)) from exc
        return _run_view(runner)

    @app.post("/runs/{run_id}/execute", response_model=RunView)
    def execute(run_id: str, request: ExecuteRequest) -> RunView:
        with registry.lock(run_id):
            runner = registry.load(run_id)
            try:
                runner.execute(until=request.until, force=request.force)
            except ForgeError as exc:
                raise _error(500, "stage_failed", str(exc)) from exc
        return _run_view(runner)

    @app.get("/runs/{run_id}/report", response_model=ReportView)
    def report(run_id: str) -> ReportView:
        runner = registry.load(run_id)
        return ReportView(
            run_id=run_id, rows=[ReportRow(**row) for row in runner.report()]
        )

    @app.post("/losscheck", response_model=LosscheckView)
    def losscheck(request: LosscheckRequest) -> LosscheckView:
        try:
            result = verify_loss_fixtures(request.fixtures_path, request.tolerance)
        except ForgeError as exc:
            raise _error(400, "config_error", str(exc)) from exc
        return LosscheckView(**result)

    return app
