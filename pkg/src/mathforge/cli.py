"""`forge` command-line interface.

The CLI is a thin client of the HTTP API: with --server it talks to a
running service, otherwise it mounts the same app in-process against a
local workspace. Either way all behavior flows through one surface.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx
import yaml

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

_EXIT_BY_CODE = {
    "config_error": EXIT_CONFIG,
    "run_not_found": EXIT_CONFIG,
    "upstream_incomplete": EXIT_STAGE,
    "stage_failed": EXIT_STAGE,
}


class CliFailure(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _open_client(args: argparse.Namespace) -> httpx.Client:
    server = args.server or os.environ.get("FORGE_SERVER", "")
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
    import warnings

    # starlette warns about its httpx pairing on import; not actionable here.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

        from .service import create_app

        return TestClient(
            create_app(args.workspace), raise_server_exceptions=False, backend="asyncio"
        )


def _call(client: httpx.Client, method: str, path: str, payload: dict | None = None) -> dict:
    response = client.request(method, path, json=payload)
    if response.status_code < 400:
        return response.json()
    try:
        detail = response.json().get("detail", {})
        code = detail.get("code", "")
        message = detail.get("message", response.text)
    except (ValueError, AttributeError):
        code, message = "", response.text
    raise CliFailure(message, _EXIT_BY_CODE.get(code, EXIT_STAGE))


def _load_config_document(path: str) -> dict:
    config_path = Path(path)
    if not config_path.is_file():
        raise CliFailure(f"config file not found: {path}", EXIT_CONFIG)
    try:
        data = yaml.safe_load(config_path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise CliFailure(f"cannot parse {path}: {exc}", EXIT_CONFIG)
    if not isinstance(data, dict):
        raise CliFailure(f"{path}: config root must be a mapping", EXIT_CONFIG)
    return data


_STAGE_ORDER = (
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


def _print_stages(run: dict) -> None:
    stages = run["stages"]
    order = [s for s in _STAGE_ORDER if s in stages]
    order += [s for s in stages if s not in _STAGE_ORDER]
    for name in order:
        info = stages[name]
        digest = (info.get("content_hash") or "")[:12]
        wall = info.get("wall_time")
        timing = f"{wall:.2f}s" if wall is not None else "-"
        print(f"{name:<11} {info['status']:<9} {digest:<12} {timing}")


def _stage_failures(run: dict) -> list[str]:
    return [name for name, info in run["stages"].items() if info["status"] == "failed"]


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(args.workspace), host=args.host, port=args.port)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    with _open_client(args) as client:
        if args.resume:
            run_id = args.resume
            _call(client, "GET", f"/runs/{run_id}")
        else:
            document = _load_config_document(args.config)
            run = _call(
                client, "POST", "/runs", {"config": document, "run_id": args.run_id}
            )
            run_id = run["run_id"]
            print(f"run {run_id} created (config {run['config_hash'][:12]})")
        if args.stage:
            run = _call(
                client,
                "POST",
                f"/runs/{run_id}/stages/{args.stage}",
                {"force": args.force},
            )
        else:
            run = _call(
                client, "POST", f"/runs/{run_id}/execute", {"force": args.force}
            )
        _print_stages(run)
        failures = _stage_failures(run)
        if failures:
            print(f"failed stages: {failures}", file=sys.stderr)
            return EXIT_STAGE
    return EXIT_OK


def cmd_overlap(args: argparse.Namespace) -> int:
    with _open_client(args) as client:
        run = _call(
            client,
            "POST",
            f"/runs/{args.run}/stages/overlap",
            {"force": args.force, "corpus_path": args.corpus},
        )
        stats = run["stages"]["overlap"]["stats"]
        print(json.dumps(stats, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_losscheck(args: argparse.Namespace) -> int:
    with _open_client(args) as client:
        result = _call(
            client,
            "POST",
            "/losscheck",
            {"fixtures_path": args.fixtures, "tolerance": args.tolerance},
        )
    status = "ok" if result["passed"] else "FAILED"
    print(
        f"losscheck {status}: {result['n_records']} records, "
        f"max |diff| = {result['max_abs_diff']:.3e} (tol {result['tolerance']:.0e})"
    )
    return EXIT_OK if result["passed"] else EXIT_STAGE


def cmd_report(args: argparse.Namespace) -> int:
    with _open_client(args) as client:
        report = _call(client, "GET", f"/runs/{args.run}/report")
    print(f"{'stage':<11} {'status':<9} {'records':>8} {'time':>8}  hash")
    for row in report["rows"]:
        records = row["records"] if row["records"] is not None else "-"
        wall = f"{row['wall_time']:.2f}s" if row["wall_time"] is not None else "-"
        digest = (row["content_hash"] or "")[:12]
        print(f"{row['stage']:<11} {row['status']:<9} {records:>8} {wall:>8}  {digest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forge",
        description="Committee-driven math data synthesis pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--workspace",
            default=os.environ.get("FORGE_WORKSPACE", "forge_runs"),
            help="run directory root for in-process mode",
        )
        p.add_argument(
            "--server",
            default="",
            help="base URL of a running forge service (default: in-process)",
        )

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8432)
    serve.add_argument(
        "--workspace", default=os.environ.get("FORGE_WORKSPACE", "forge_runs")
    )
    serve.set_defaults(func=cmd_serve)

    run = sub.add_parser("run", help="create a run and execute stages")
    run.add_argument("--config", help="YAML/JSON pipeline config")
    run.add_argument("--stage", help="run a single stage instead of all")
    run.add_argument("--resume", help="existing run id to resume")
    run.add_argument("--run-id", help="name for a new run")
    run.add_argument("--force", action="store_true", help="re-run completed stages")
    add_common(run)
    run.set_defaults(func=cmd_run)

    overlap = sub.add_parser("overlap", help="corpus-overlap analysis for a run")
    overlap.add_argument("--run", required=True)
    overlap.add_argument("--corpus", required=True, help="one instruction per line")
    overlap.add_argument("--force", action="store_true")
    add_common(overlap)
    overlap.set_defaults(func=cmd_overlap)

    losscheck = sub.add_parser("losscheck", help="verify a loss fixture file")
    losscheck.add_argument("--fixtures", required=True)
    losscheck.add_argument("--tolerance", type=float, default=1e-9)
    add_common(losscheck)
    losscheck.set_defaults(func=cmd_losscheck)

    report = sub.add_parser("report", help="stage status table for a run")
    report.add_argument("--run", required=True)
    add_common(report)
    report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run" and not args.resume and not args.config:
        parser.error("run requires --config (or --resume)")
    try:
        return args.func(args)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except httpx.HTTPError as exc:
        print(f"error: cannot reach server: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
