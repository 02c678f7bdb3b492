"""Embedded trajectories and their on-disk store."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ..datamodel import ConceptStream
from ..errors import AllTokensOutOfVocabulary, DataError
from .backends import EmbeddingBackend, StaticBackend, embed_texts
from .cache import EmbeddingCache
from .prefix import PrefixMode, build_prefixes


@dataclass
class EmbeddedTrajectory:
    """Time-ordered embeddings x_1..x_N of one concept stream.

    Rows of ``vectors`` flagged in ``missing`` are NaN (static lookups where
    every token was out of vocabulary).
    """

    dataset_id: str
    participant_id: str
    group: str
    concept: str
    backend_id: str
    prefix_mode: PrefixMode
    vectors: np.ndarray
    missing: np.ndarray
    items: tuple[str, ...] = ()

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise DataError("trajectory vectors must be a 2-D array (N, dim)")
        self.missing = np.asarray(self.missing, dtype=bool)
        if self.missing.shape != (self.vectors.shape[0],):
            raise DataError("missing mask must have one flag per trajectory point")
        if self.items and len(self.items) != self.vectors.shape[0]:
            raise DataError("items must align with trajectory points")
        present = self.vectors[~self.missing]
        if not np.all(np.isfinite(present)):
            raise DataError(f"trajectory {self.key} has non-finite embeddings")
        self.prefix_mode = PrefixMode.parse(self.prefix_mode)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.dataset_id, self.participant_id, self.concept)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def with_vectors(self, vectors: np.ndarray, backend_id: str | None = None) -> "EmbeddedTrajectory":
        return EmbeddedTrajectory(
            self.dataset_id, self.participant_id, self.group, self.concept,
            backend_id or self.backend_id, self.prefix_mode, vectors, self.missing.copy(), self.items,
        )

    def to_record(self) -> dict:
        return {
            "dataset": self.dataset_id,
            "participant_id": self.participant_id,
            "group": self.group,
            "concept": self.concept,
            "backend_id": self.backend_id,
            "prefix_mode": self.prefix_mode.value,
            "items": list(self.items),
            "vectors": [None if m else [float(x) for x in row] for row, m in zip(self.vectors, self.missing)],
        }

    @classmethod
    def from_record(cls, rec: dict, dim: int | None = None) -> "EmbeddedTrajectory":
        rows = rec["vectors"]
        if dim is None:
            dim = next((len(r) for r in rows if r is not None), 0)
        missing = np.array([r is None for r in rows], dtype=bool)
        vectors = np.full((len(rows), dim), np.nan)
        for i, r in enumerate(rows):
            if r is not None:
                vectors[i] = r
        return cls(rec["dataset"], rec["participant_id"], rec["group"], rec["concept"],
                   rec["backend_id"], rec["prefix_mode"], vectors, missing, tuple(rec.get("items", ())))


def embed_stream(
    stream: ConceptStream,
    backend: EmbeddingBackend,
    mode: PrefixMode | str,
    cache: EmbeddingCache | None = None,
) -> EmbeddedTrajectory:
    """Build prefixes for ``stream`` and embed them.

    Static backends look each prefix up directly; a prefix with no known
    token becomes a flagged missing point instead of an error.
    """
    mode = PrefixMode.parse(mode)
    texts = build_prefixes(stream, mode)
    n, d = len(texts), backend.dimension
    vectors = np.full((n, d), np.nan)
    missing = np.zeros(n, dtype=bool)
    if isinstance(backend, StaticBackend):
        for i, text in enumerate(texts):
            try:
                vectors[i] = backend.lookup(text)
            except AllTokensOutOfVocabulary:
                missing[i] = True
    else:
        vectors[:] = np.vstack(embed_texts(backend, texts, cache))
    return EmbeddedTrajectory(
        stream.dataset_id, stream.participant_id, stream.group, stream.concept,
        backend.backend_id, mode, vectors, missing, stream.items,
    )


def write_trajectories(trajectories: Iterable[EmbeddedTrajectory], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(json.dumps(traj.to_record(), ensure_ascii=False) + "\n")


def read_trajectories(path: str | Path) -> list[EmbeddedTrajectory]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(EmbeddedTrajectory.from_record(json.loads(line)))
    return out
