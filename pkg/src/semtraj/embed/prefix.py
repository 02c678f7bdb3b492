"""Prefix construction for cumulative and per-item embeddings."""

from __future__ import annotations

from enum import Enum

from ..datamodel import ConceptStream
from ..errors import ConfigError


class PrefixMode(str, Enum):
    CUMULATIVE = "cumulative"
    NON_CUMULATIVE = "non_cumulative"

    @classmethod
    def parse(cls, value: "str | PrefixMode") -> "PrefixMode":
        if isinstance(value, PrefixMode):
            return value
        norm = value.strip().lower().replace("-", "_")
        try:
            return cls(norm)
        except ValueError:
            raise ConfigError(
                f"unknown prefix mode {value!r}; expected 'cumulative' or 'non-cumulative'"
            ) from None


def build_prefixes(stream: ConceptStream, mode: PrefixMode | str) -> list[str]:
    """Texts to embed, one per item.

    Cumulative element t joins items 1..t with a single space; non-cumulative
    element t is item t alone.
    """
    mode = PrefixMode.parse(mode)
    if mode is PrefixMode.NON_CUMULATIVE:
        return list(stream.items)
    out = []
    acc = ""
    for item in stream.items:
        acc = item if not acc else f"{acc} {item}"
        out.append(acc)
    return out
