"""Embedding backends and the cached batch client.

Remote providers are reached through one generic HTTP JSON contract; all
per-provider details (URL, auth header, request body, response path) come
from the config file.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx
import numpy as np

from ..errors import (
    AuthMissing,
    BackendUnavailable,
    ConfigError,
    DataError,
    DimensionMismatch,
    UnknownBackend,
)
from .cache import EmbeddingCache
from .table import VectorTable, load_vector_table, lookup_static

logger = logging.getLogger(__name__)

REMOTE_API = "remote_api"
STATIC_TABLE = "static_table"

TRANSIENT_STATUS = {408, 425, 429, 500, 502, 503, 504}


class EmbeddingBackend:
    """Base class: subclasses implement :meth:`fetch` for one batch."""

    kind = REMOTE_API

    def __init__(self, backend_id: str, dimension: int, batch_size: int = 100, max_parallel: int = 4):
        if dimension <= 0:
            raise ConfigError(f"backend {backend_id!r}: dimension must be positive")
        if batch_size <= 0:
            raise ConfigError(f"backend {backend_id!r}: batch_size must be positive")
        self.backend_id = backend_id
        self.dimension = dimension
        self.batch_size = batch_size
        self.max_parallel = max_parallel
        self.request_count = 0

    def fetch(self, texts: Sequence[str]) -> list[Sequence[float]]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.backend_id!r}, dim={self.dimension})"


class StaticBackend(EmbeddingBackend):
    """Local word-vector table; multi-word texts are averaged over known tokens."""

    kind = STATIC_TABLE

    def __init__(self, backend_id: str, table: VectorTable):
        super().__init__(backend_id, table.dimension)
        self.table = table

    def lookup(self, text: str) -> np.ndarray:
        return lookup_static(self.table, text)

    def fetch(self, texts):
        return [self.lookup(t) for t in texts]


class RetryableError(Exception):
    pass


@dataclass
class HttpBackend(EmbeddingBackend):
    """Generic JSON-over-HTTP embedding endpoint.

    The request body is ``{**extra_body, input_field: [texts...]}``. The
    response is walked along ``response_path``; a ``"*"`` element maps over a
    list, so OpenAI-style payloads use ``["data", "*", "embedding"]``.
    """

    backend_id: str
    dimension: int
    url: str
    auth_env_var: str | None = None
    auth_header: str = "Authorization"
    auth_prefix: str = "Bearer "
    input_field: str = "input"
    extra_body: dict = field(default_factory=dict)
    response_path: list = field(default_factory=lambda: ["data", "*", "embedding"])
    batch_size: int = 100
    max_parallel: int = 4
    max_attempts: int = 5
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    timeout: float = 60.0
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self):
        EmbeddingBackend.__init__(self, self.backend_id, self.dimension, self.batch_size, self.max_parallel)
        self._client: httpx.Client | None = None

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.auth_env_var:
            token = os.environ.get(self.auth_env_var)
            if not token:
                raise AuthMissing(
                    f"backend {self.backend_id!r} needs environment variable {self.auth_env_var}"
                )
            headers[self.auth_header] = f"{self.auth_prefix}{token}"
        return headers

    def _client_(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.timeout, transport=self.transport)
        return self._client

    def _extract(self, payload, n: int) -> list:
        def walk(node, path):
            if not path:
                return node
            head, rest = path[0], path[1:]
            if head == "*":
                return [walk(x, rest) for x in node]
            return walk(node[head], rest)

        try:
            vectors = walk(payload, list(self.response_path))
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(
                f"backend {self.backend_id!r}: response does not match path {self.response_path}"
            ) from exc
        if not isinstance(vectors, list) or len(vectors) != n:
            raise BackendUnavailable(
                f"backend {self.backend_id!r}: expected {n} vectors in response"
            )
        return vectors

    def _post_once(self, texts: Sequence[str]) -> list:
        body = {**self.extra_body, self.input_field: list(texts)}
        try:
            resp = self._client_().post(self.url, json=body, headers=self._headers())
        except httpx.TransportError as exc:
            raise RetryableError(str(exc)) from exc
        if resp.status_code in TRANSIENT_STATUS:
            raise RetryableError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendUnavailable(
                f"backend {self.backend_id!r}: HTTP {resp.status_code}: {resp.text[:200]}"
            )
        try:
            payload = resp.json()
        except json.JSONDecodeError as exc:
            raise BackendUnavailable(f"backend {self.backend_id!r}: response is not JSON") from exc
        return self._extract(payload, len(texts))

    def fetch(self, texts):
        delay = self.backoff_base
        for attempt in range(1, self.max_attempts + 1):
            self.request_count += 1
            try:
                return self._post_once(texts)
            except RetryableError as exc:
                if attempt == self.max_attempts:
                    raise BackendUnavailable(
                        f"backend {self.backend_id!r} failed after {attempt} attempts: {exc}"
                    ) from exc
                logger.warning("backend %s attempt %d failed (%s); retrying in %.1fs",
                               self.backend_id, attempt, exc, delay)
                self.sleep(delay)
                delay *= self.backoff_factor
        raise AssertionError("unreachable")


def _check_vector(backend: EmbeddingBackend, vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != backend.dimension:
        raise DimensionMismatch(
            f"backend {backend.backend_id!r} returned a vector of shape {arr.shape}, "
            f"expected ({backend.dimension},)"
        )
    if not np.all(np.isfinite(arr)):
        raise DataError(f"backend {backend.backend_id!r} returned non-finite values")
    return arr


def embed_texts(
    backend: EmbeddingBackend,
    texts: Sequence[str],
    cache: EmbeddingCache | None = None,
) -> list[np.ndarray]:
    """Embed texts through the cache, fetching only the misses.

    Unique uncached texts are split into batches of ``backend.batch_size``
    and fetched with up to ``backend.max_parallel`` concurrent requests.
    Results are written to the cache from the calling thread only.
    """
    if any(not isinstance(t, str) or not t.strip() for t in texts):
        raise DataError("embed_texts needs non-empty strings")
    cache = cache if cache is not None else EmbeddingCache()
    found: dict[str, np.ndarray] = {}
    missing: list[str] = []
    for t in texts:
        if t in found or t in missing:
            continue
        vec = cache.get(backend.backend_id, t)
        if vec is None:
            missing.append(t)
        else:
            found[t] = _check_vector(backend, vec)

    if missing:
        batches = [missing[i:i + backend.batch_size] for i in range(0, len(missing), backend.batch_size)]
        workers = max(1, min(backend.max_parallel, len(batches)))
        if workers == 1:
            results = [backend.fetch(b) for b in batches]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(backend.fetch, batches))
        for batch, vectors in zip(batches, results):
            if len(vectors) != len(batch):
                raise BackendUnavailable(
                    f"backend {backend.backend_id!r} returned {len(vectors)} vectors for {len(batch)} texts"
                )
            for t, v in zip(batch, vectors):
                arr = _check_vector(backend, v)
                cache.put(backend.backend_id, t, arr)
                found[t] = arr
    return [found[t].copy() for t in texts]


# ---------------------------------------------------------------- config

def load_config(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict) or not isinstance(cfg.get("backends", []), list):
        raise ConfigError(f"config {path} must be an object with a 'backends' list")
    return cfg


_HTTP_KEYS = {
    "url", "auth_env_var", "auth_header", "auth_prefix", "input_field", "extra_body",
    "response_path", "batch_size", "max_parallel", "max_attempts", "backoff_base",
    "backoff_factor", "timeout",
}


def backend_from_config(entry: dict, *, base_dir: Path | None = None) -> EmbeddingBackend:
    try:
        backend_id = entry["backend_id"]
        kind = entry.get("kind", REMOTE_API)
        dimension = int(entry["dimension"]) if "dimension" in entry else None
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad backend entry {entry!r}") from exc
    if kind == STATIC_TABLE:
        path = Path(entry.get("path", ""))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        backend = static_backend(path, backend_id)
        if dimension is not None and dimension != backend.dimension:
            raise ConfigError(
                f"backend {backend_id!r}: config dimension {dimension} but table has {backend.dimension}"
            )
        return backend
    if kind != REMOTE_API:
        raise ConfigError(f"backend {backend_id!r}: unknown kind {kind!r}")
    if dimension is None or "url" not in entry:
        raise ConfigError(f"remote backend {backend_id!r} needs 'dimension' and 'url'")
    kwargs = {k: v for k, v in entry.items() if k in _HTTP_KEYS}
    return HttpBackend(backend_id=backend_id, dimension=dimension, **kwargs)


def static_backend(path: str | Path, backend_id: str | None = None) -> StaticBackend:
    path = Path(path)
    if not path.is_file():
        raise UnknownBackend(f"vector table not found: {path}")
    table = load_vector_table(path)
    return StaticBackend(backend_id or f"static:{path.name}", table)


def resolve_backend(backend_id: str, config: dict | None = None, *, base_dir: Path | None = None) -> EmbeddingBackend:
    """Look up a backend by id.

    ``static:<path>`` loads a vector table directly; any other id must be
    declared in the config's ``backends`` list.
    """
    if backend_id.startswith("static:"):
        path = backend_id[len("static:"):]
        return static_backend(path, f"static:{Path(path).name}")
    for entry in (config or {}).get("backends", []):
        if entry.get("backend_id") == backend_id:
            return backend_from_config(entry, base_dir=base_dir)
    raise UnknownBackend(f"unknown backend {backend_id!r}")
