"""Embedding backends, prefix construction and trajectory storage."""

from .backends import (
    EmbeddingBackend,
    HttpBackend,
    StaticBackend,
    embed_texts,
    load_config,
    resolve_backend,
)
from .cache import EmbeddingCache
from .prefix import PrefixMode, build_prefixes
from .table import VectorTable, load_vector_table, lookup_static, parse_vector_table
from .trajectory import EmbeddedTrajectory, embed_stream, read_trajectories, write_trajectories

__all__ = [
    "EmbeddedTrajectory",
    "EmbeddingBackend",
    "EmbeddingCache",
    "HttpBackend",
    "PrefixMode",
    "StaticBackend",
    "VectorTable",
    "build_prefixes",
    "embed_stream",
    "embed_texts",
    "load_config",
    "load_vector_table",
    "lookup_static",
    "parse_vector_table",
    "read_trajectories",
    "resolve_backend",
    "write_trajectories",
]
