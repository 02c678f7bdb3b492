"""Run directories, the run manifest and tidy report writers."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__

MANIFEST = "manifest.json"
STREAMS = "streams.csv"
TRAJ_DIR = "trajectories"
TRAJ_ZCA_DIR = "trajectories_zca"
WHITEN_DIR = "whitening"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_id_for(inputs: Sequence[str | Path], schema: Mapping) -> str:
    """Content hash of the ingest inputs (file bytes + schema), 16 hex chars."""
    h = hashlib.sha256()
    h.update(json.dumps(schema, sort_keys=True).encode())
    for p in inputs:
        h.update(b"\x00" + sha256_file(p).encode())
    return h.hexdigest()[:16]


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("_") or "x"


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    run_id: str
    tool_version: str = __version__
    inputs: list = field(default_factory=list)
    schema: dict = field(default_factory=dict)
    datasets: list = field(default_factory=list)
    config_hash: str | None = None
    backends: list = field(default_factory=list)
    prefix_modes: list = field(default_factory=list)
    whitening: dict = field(default_factory=lambda: {"enabled": False})
    stages: dict = field(default_factory=dict)
    created: str = field(default_factory=now)
    updated: str = field(default_factory=now)

    def record_stage(self, name: str, params: Mapping, outputs: Iterable[str]) -> None:
        self.stages[name] = {"params": dict(params), "outputs": sorted(outputs), "timestamp": now()}
        self.updated = now()

    def add_unique(self, attr: str, value) -> None:
        lst = getattr(self, attr)
        if value not in lst:
            lst.append(value)
            lst.sort()

    def save(self, run_dir: Path) -> None:
        with open(run_dir / MANIFEST, "w", encoding="utf-8") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, run_dir: Path) -> "RunManifest":
        with open(run_dir / MANIFEST, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def write_csv(rows: Iterable[Mapping], columns: Sequence[str], path: str | Path, run_id: str | None = None) -> None:
    """Tidy CSV; ``None``/non-finite become empty cells, floats keep full precision."""
    cols = list(columns) + (["run_id"] if run_id else [])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for row in rows:
            vals = [_cell(row.get(c)) for c in columns]
            if run_id:
                vals.append(run_id)
            writer.writerow(vals)


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(obj, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, ensure_ascii=False, allow_nan=False)
        fh.write("\n")


def read_csv_rows(path: str | Path, numeric: Sequence[str] = ()) -> list[dict]:
    """Read a tidy CSV back; listed numeric columns become float or None."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for c in numeric:
            if c in row:
                row[c] = float(row[c]) if row[c] != "" else None
    return rows
