"""JSON-lines record files."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .config import SCHEMA_VERSION
from .episode import EpisodeRecord


def write_jsonl(path: str | Path, records: Iterable[EpisodeRecord]) -> None:
    with open(path, "w", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from None
            if d.get("schema_version") != SCHEMA_VERSION:
                raise ValueError(f"{path}:{lineno}: unsupported schema_version {d.get('schema_version')!r}")
            out.append(d)
    return out
