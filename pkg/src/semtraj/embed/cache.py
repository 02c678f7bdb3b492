"""Append-only JSON-lines embedding cache."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def cache_key(backend_id: str, text: str) -> str:
    return hashlib.sha256(backend_id.encode("utf-8") + b"\x00" + text.encode("utf-8")).hexdigest()


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class EmbeddingCache:
    """Persistent (backend_id, text) -> vector store.

    Each record is one JSON line ``{key, backend_id, text_hash, dim, vector}``.
    The in-memory index is rebuilt from the file on open; a torn final line
    (from a crash mid-write) is skipped. Writes are serialized by a lock,
    readers see the index as of their lookup.

    Pass ``path=None`` for a memory-only cache.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._index: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    vec = np.asarray(rec["vector"], dtype=np.float64)
                    if vec.shape != (rec["dim"],):
                        raise ValueError("dim field does not match vector length")
                except (ValueError, KeyError, TypeError) as exc:
                    logger.warning("skipping unreadable cache record %s:%d (%s)", self.path, lineno, exc)
                    continue
                self._index[rec["key"]] = vec

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, key: tuple[str, str]) -> bool:
        return cache_key(*key) in self._index

    def get(self, backend_id: str, text: str) -> np.ndarray | None:
        vec = self._index.get(cache_key(backend_id, text))
        if vec is None:
            self.misses += 1
            return None
        self.hits += 1
        return vec.copy()

    def put(self, backend_id: str, text: str, vector) -> None:
        vec = np.asarray(vector, dtype=np.float64)
        key = cache_key(backend_id, text)
        record = {
            "key": key,
            "backend_id": backend_id,
            "text_hash": text_hash(text),
            "dim": int(vec.shape[0]),
            # float repr round-trips exactly through JSON
            "vector": [float(x) for x in vec],
        }
        with self._lock:
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record) + "\n")
            self._index[key] = vec.copy()
