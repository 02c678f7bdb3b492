import hashlib
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semtraj.embed import EmbeddedTrajectory, EmbeddingBackend


def make_traj(X, missing=None, items=None, backend="fake", mode="cumulative",
              participant="p1", group="g1", concept="c1", dataset="ds"):
    X = np.asarray(X, dtype=float)
    if missing is None:
        missing = np.zeros(len(X), dtype=bool)
    return EmbeddedTrajectory(dataset, participant, group, concept, backend, mode, X, missing,
                              tuple(items) if items else ())


class HashBackend(EmbeddingBackend):
    """Deterministic fake remote backend: text -> hash-seeded Gaussian vector."""

    def __init__(self, dimension=3, batch_size=100, wrong_dim=None, backend_id="hash"):
        super().__init__(backend_id, dimension, batch_size, max_parallel=4)
        self.wrong_dim = wrong_dim
        self.calls = []

    def fetch(self, texts):
        self.calls.append(list(texts))
        self.request_count += 1
        out = []
        for t in texts:
            seed = int.from_bytes(hashlib.sha256(t.encode()).digest()[:8], "little")
            out.append(np.random.default_rng(seed).normal(size=self.wrong_dim or self.dimension))
        return out


@pytest.fixture
def hash_backend():
    return HashBackend()


VEC_FIXTURE = "2 3\nfoo 0.1 0.2 0.3\nbar 1 0 0\n"


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
