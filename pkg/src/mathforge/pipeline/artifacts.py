"""JSONL artifact I/O: atomic writes, schema headers, content hashes.

Every stage output is a JSONL file whose first line is a schema-version
record; files are written to a temp path and renamed into place, so a
partially written artifact is never observable under its final name.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from ..errors import StageFailed


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_bytes_atomic(path: Path, data: bytes) -> str:
    """Write data to path via temp-file + rename; returns the sha256 hex."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return hashlib.sha256(data).hexdigest()


def write_jsonl(path: Path, schema: str, records: list[dict]) -> str:
    lines = [dumps_record({"schema": schema})]
    lines.extend(dumps_record(record) for record in records)
    data = ("\n".join(lines) + "\n").encode("utf-8")
    return write_bytes_atomic(path, data)


def read_jsonl(path: Path) -> tuple[str, list[dict]]:
    """Returns (schema, records); raises StageFailed on malformed files."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StageFailed(f"cannot read artifact {path}: {exc}") from exc
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise StageFailed(f"artifact {path} is empty")
    header = json.loads(lines[0])
    schema = header.get("schema")
    if not schema:
        raise StageFailed(f"artifact {path} missing schema header")
    return schema, [json.loads(line) for line in lines[1:]]


def file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
