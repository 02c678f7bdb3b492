"""Synthetic concept-production data for smoke tests and demo scripts.

Words live in clusters of a static vector table; a stream stays in its
current cluster or switches to another one with a per-group probability.
Groups with a higher switch probability take larger semantic jumps.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np


def make_vocabulary(rng: np.random.Generator, n_clusters: int = 6, words_per_cluster: int = 12,
                    dim: int = 16, spread: float = 0.3) -> dict[str, np.ndarray]:
    centers = rng.normal(size=(n_clusters, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    vocab = {}
    for c in range(n_clusters):
        for w in range(words_per_cluster):
            vocab[f"c{c}w{w}"] = centers[c] + spread * rng.normal(size=dim) / np.sqrt(dim)
    return vocab


def vec_text(vocab: dict[str, np.ndarray]) -> str:
    dim = len(next(iter(vocab.values())))
    lines = [f"{len(vocab)} {dim}"]
    lines += [w + " " + " ".join(repr(float(x)) for x in v) for w, v in vocab.items()]
    return "\n".join(lines) + "\n"


def _stream(rng, n_items, n_clusters, words_per_cluster, switch_prob):
    cluster = int(rng.integers(n_clusters))
    used = set()
    items = []
    while len(items) < n_items:
        if items and rng.random() < switch_prob:
            cluster = int((cluster + rng.integers(1, n_clusters)) % n_clusters)
        word = f"c{cluster}w{int(rng.integers(words_per_cluster))}"
        if word in used:
            continue
        used.add(word)
        items.append(word)
    return items


def group_shift_csv(
    rng: np.random.Generator,
    switch_probs: dict[str, float],
    *,
    dataset: str = "synthetic",
    participants_per_group: int = 10,
    concepts: tuple[str, ...] = ("tree", "sun", "duck"),
    n_items: tuple[int, int] = (6, 10),
    n_clusters: int = 6,
    words_per_cluster: int = 12,
) -> str:
    """Canonical-schema CSV text, rows in random order."""
    rows = []
    for group, prob in switch_probs.items():
        for p in range(participants_per_group):
            pid = f"{group}{p:02d}"
            for concept in concepts:
                n = int(rng.integers(n_items[0], n_items[1] + 1))
                for pos, item in enumerate(_stream(rng, n, n_clusters, words_per_cluster, prob), start=1):
                    rows.append([dataset, pid, group, concept, pos, item])
    order = rng.permutation(len(rows))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "participant_id", "group", "concept", "position", "item"])
    writer.writerows(rows[i] for i in order)
    return buf.getvalue()


def write_group_shift_fixture(directory: str | Path, seed: int, switch_probs: dict[str, float],
                              **kwargs) -> tuple[Path, Path]:
    """Write ``data.csv`` and ``vectors.vec`` into ``directory``."""
    rng = np.random.default_rng(seed)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n_clusters = kwargs.pop("n_clusters", 6)
    words_per_cluster = kwargs.pop("words_per_cluster", 12)
    vocab = make_vocabulary(rng, n_clusters, words_per_cluster, kwargs.pop("dim", 16), kwargs.pop("spread", 0.3))
    data = directory / "data.csv"
    vec = directory / "vectors.vec"
    csv_text = group_shift_csv(rng, switch_probs, n_clusters=n_clusters,
                               words_per_cluster=words_per_cluster, **kwargs)
    data.write_text(csv_text, encoding="utf-8")
    vec.write_text(vec_text(vocab), encoding="utf-8")
    return data, vec
