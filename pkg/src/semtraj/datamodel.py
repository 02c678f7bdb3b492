"""Concept streams: CSV ingestion, validation and descriptive statistics."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping

from .errors import (
    BadPosition,
    ConfigError,
    DataError,
    DuplicatePosition,
    EmptyInput,
    EmptyItem,
    MissingColumn,
    NonContiguousPositions,
)

LOGICAL_FIELDS = ("dataset", "participant", "group", "concept", "position", "item")
CANONICAL_COLUMNS = ("dataset", "participant_id", "group", "concept", "position", "item")

# logical field -> canonical column name
CANONICAL_SCHEMA: dict[str, str] = dict(zip(LOGICAL_FIELDS, CANONICAL_COLUMNS))


@dataclass(frozen=True)
class ConceptStream:
    """One participant's ordered production list for one concept."""

    dataset_id: str
    participant_id: str
    group: str
    concept: str
    items: tuple[str, ...]

    def __post_init__(self):
        if not self.items:
            raise EmptyInput(f"stream {self.key} has no items")
        for pos, item in enumerate(self.items, start=1):
            if not item.strip():
                raise EmptyItem(f"stream {self.key}: empty item at position {pos}")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.dataset_id, self.participant_id, self.concept)

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class DatasetStats:
    dataset_id: str
    n_streams: int
    n_participants: int
    n_groups: int
    properties_mean: float
    properties_sd: float
    words_mean: float
    words_sd: float
    # False when only one stream exists; the SDs are then reported as 0.
    sd_defined: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def load_schema(path: str | Path) -> dict:
    """Read a schema JSON file mapping logical fields to column names.

    Values are either a column name or ``{"value": "<constant>"}`` for
    exports that lack a column (typically ``dataset``). Missing logical
    fields fall back to the canonical column names.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"schema file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"schema file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"schema file {path} must contain a JSON object")
    unknown = set(raw) - set(LOGICAL_FIELDS)
    if unknown:
        raise ConfigError(f"schema {path} has unknown fields: {sorted(unknown)}")
    return {**CANONICAL_SCHEMA, **raw}


def _resolve(row: dict, spec, field: str):
    if isinstance(spec, dict):
        return spec["value"]
    return row[spec]


def parse_dataset(
    source: BinaryIO | bytes | str,
    schema: Mapping[str, object] | None = None,
    *,
    source_name: str = "<input>",
) -> list[ConceptStream]:
    """Parse a CSV export into validated concept streams.

    Rows are grouped by (dataset, participant, concept) and ordered by
    their position column, so input row order does not matter.

    Args:
        source: binary file object, raw bytes, or already-decoded text.
        schema: logical field -> column name (or ``{"value": ...}``).
        source_name: used in error messages.

    Returns:
        Streams sorted by (dataset, participant, concept).
    """
    schema = {**CANONICAL_SCHEMA, **(schema or {})}
    if isinstance(source, bytes):
        text = source.decode("utf-8-sig")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read().decode("utf-8-sig")

    reader = csv.DictReader(io.StringIO(text, newline=""))
    header = reader.fieldnames
    if not header:
        raise EmptyInput(f"{source_name}: no header row")
    for field in LOGICAL_FIELDS:
        spec = schema[field]
        if isinstance(spec, dict):
            if field in ("position", "item") or "value" not in spec:
                raise ConfigError(f"schema field {field!r} must name a column")
            continue
        if spec not in header:
            raise MissingColumn(
                f"{source_name}: column {spec!r} (for {field}) not in header {header}"
            )

    rows: dict[tuple[str, str, str], dict[int, tuple[str, int]]] = defaultdict(dict)
    groups: dict[tuple[str, str, str], str] = {}
    for lineno, row in enumerate(reader, start=2):
        dataset = str(_resolve(row, schema["dataset"], "dataset")).strip()
        participant = str(_resolve(row, schema["participant"], "participant")).strip()
        concept = str(_resolve(row, schema["concept"], "concept")).strip()
        group = str(_resolve(row, schema["group"], "group")).strip()
        raw_pos = (row[schema["position"]] or "").strip()
        item = row[schema["item"]] or ""
        key = (dataset, participant, concept)
        try:
            pos = int(float(raw_pos))
            if float(raw_pos) != pos:
                raise ValueError
        except ValueError:
            raise BadPosition(
                f"{source_name} line {lineno}: position {raw_pos!r} is not an integer"
            ) from None
        if not item.strip():
            raise EmptyItem(f"{source_name} line {lineno}: empty item in stream {key}")
        if pos in rows[key]:
            raise DuplicatePosition(
                f"{source_name} line {lineno}: position {pos} repeated in stream {key} "
                f"(first seen on line {rows[key][pos][1]})"
            )
        prev_group = groups.setdefault(key, group)
        if prev_group != group:
            raise DataError(
                f"{source_name} line {lineno}: stream {key} has conflicting groups "
                f"{prev_group!r} and {group!r}"
            )
        rows[key][pos] = (item, lineno)

    if not rows:
        raise EmptyInput(f"{source_name}: no data rows")

    streams = []
    for key in sorted(rows):
        by_pos = rows[key]
        positions = sorted(by_pos)
        if positions != list(range(1, len(positions) + 1)):
            raise NonContiguousPositions(
                f"{source_name}: stream {key} has positions {positions}, expected 1..{len(positions)}"
            )
        items = tuple(by_pos[p][0] for p in positions)
        streams.append(ConceptStream(key[0], key[1], groups[key], key[2], items))
    return streams


def read_dataset(path: str | Path, schema: Mapping[str, object] | None = None) -> list[ConceptStream]:
    with open(path, "rb") as fh:
        return parse_dataset(fh, schema, source_name=str(path))


def write_streams(streams: Iterable[ConceptStream], path: str | Path) -> None:
    """Write streams in the canonical CSV layout (re-readable by parse_dataset)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CANONICAL_COLUMNS)
        for s in streams:
            for pos, item in enumerate(s.items, start=1):
                writer.writerow([s.dataset_id, s.participant_id, s.group, s.concept, pos, item])


def word_count(stream: ConceptStream) -> int:
    return sum(len(item.split()) for item in stream.items)


def _mean_sd(values: list[int]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, sd


def descriptive_stats(streams: list[ConceptStream]) -> DatasetStats:
    """Items and whitespace words per stream: mean and sample SD (n-1)."""
    if not streams:
        raise EmptyInput("descriptive_stats needs at least one stream")
    props = [len(s) for s in streams]
    words = [word_count(s) for s in streams]
    p_mean, p_sd = _mean_sd(props)
    w_mean, w_sd = _mean_sd(words)
    ids = sorted({s.dataset_id for s in streams})
    return DatasetStats(
        dataset_id="+".join(ids),
        n_streams=len(streams),
        n_participants=len({(s.dataset_id, s.participant_id) for s in streams}),
        n_groups=len({(s.dataset_id, s.group) for s in streams}),
        properties_mean=p_mean,
        properties_sd=p_sd,
        words_mean=w_mean,
        words_sd=w_sd,
        sd_defined=len(streams) > 1,
    )


def stats_by_dataset(streams: list[ConceptStream]) -> list[DatasetStats]:
    by_ds: dict[str, list[ConceptStream]] = defaultdict(list)
    for s in streams:
        by_ds[s.dataset_id].append(s)
    return [descriptive_stats(by_ds[k]) for k in sorted(by_ds)]


STATS_COLUMNS = tuple(DatasetStats.__dataclass_fields__)


def format_stats_table(stats: list[DatasetStats]) -> str:
    """Plain-text table in the 'mean ± sd' layout."""
    lines = [f"{'Dataset':<20} {'Subjects':>8} {'Groups':>6} {'Properties':>16} {'Words':>16}"]
    for st in stats:
        props = f"{st.properties_mean:.2f} ± {st.properties_sd:.2f}"
        words = f"{st.words_mean:.2f} ± {st.words_sd:.2f}"
        flag = "" if st.sd_defined else "  (n=1, sd undefined)"
        lines.append(
            f"{st.dataset_id:<20} {st.n_participants:>8} {st.n_groups:>6} {props:>16} {words:>16}{flag}"
        )
    return "\n".join(lines)


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


def write_stats(stats: list[DatasetStats], csv_path: str | Path, json_path: str | Path) -> None:
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=STATS_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for st in stats:
            writer.writerow(st.to_dict())
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump([{k: _finite(v) if isinstance(v, float) else v for k, v in st.to_dict().items()}
                   for st in stats], fh, indent=2)
        fh.write("\n")
