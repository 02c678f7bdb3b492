"""Static word-vector tables in the fastText ``.vec`` text format."""

from __future__ import annotations

import io
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np

from ..errors import AllTokensOutOfVocabulary, BadHeader, BadVectorArity, NonNumericComponent

logger = logging.getLogger(__name__)


@dataclass
class VectorTable:
    dimension: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)
    declared_size: int | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries


def parse_vector_table(source: BinaryIO | bytes | str) -> VectorTable:
    """Parse ``<vocab_size> <dim>`` followed by ``<word> <v1> ... <v_dim>`` lines.

    A vocab-size mismatch logs a warning (and emits a ``UserWarning``); a line
    with the wrong number of components raises ``BadVectorArity`` with its
    1-based line number. Later duplicates of a word are ignored.
    """
    if isinstance(source, bytes):
        stream = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        stream = io.StringIO(source)
    else:
        stream = io.TextIOWrapper(source, encoding="utf-8")

    header = stream.readline().split()
    if len(header) != 2:
        raise BadHeader(f"expected '<vocab_size> <dimension>' header, got {header!r}")
    try:
        declared, dim = int(header[0]), int(header[1])
    except ValueError:
        raise BadHeader(f"non-integer header {header!r}") from None
    if dim <= 0 or declared < 0:
        raise BadHeader(f"invalid header values {header!r}")

    entries: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(stream, start=2):
        parts = line.rstrip("\n").rstrip("\r").rstrip(" ").split(" ")
        if parts == [""]:
            continue
        if len(parts) != dim + 1:
            raise BadVectorArity(lineno)
        word = parts[0]
        try:
            vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
        except ValueError:
            raise NonNumericComponent(lineno) from None
        if not np.all(np.isfinite(vec)):
            raise NonNumericComponent(lineno, f"non-finite vector component on line {lineno}")
        if word in entries:
            logger.warning("duplicate word %r on line %d ignored", word, lineno)
            continue
        entries[word] = vec

    if len(entries) != declared:
        msg = f"vector table header declares {declared} words but {len(entries)} were parsed"
        logger.warning(msg)
        warnings.warn(msg, stacklevel=2)
    return VectorTable(dimension=dim, entries=entries, declared_size=declared)


def load_vector_table(path: str | Path) -> VectorTable:
    with open(path, "rb") as fh:
        return parse_vector_table(fh.read())


def lookup_static(table: VectorTable, text: str) -> np.ndarray:
    """Average of the in-vocabulary token vectors of ``text``."""
    tokens = text.split()
    vecs = [table.entries[t] for t in tokens if t in table.entries]
    if not vecs:
        raise AllTokensOutOfVocabulary(f"no token of {text!r} is in the vector table")
    return np.mean(vecs, axis=0)
