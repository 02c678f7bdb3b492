"""ZCA whitening of embedding collections."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput, SingularCovariance, TooFewSamples


@dataclass
class WhiteningTransform:
    mean: np.ndarray
    W: np.ndarray
    eps: float
    source_count: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "eps": self.eps,
            "source_count": self.source_count,
            "mean": [float(x) for x in self.mean],
            "W": [float(x) for x in self.W.ravel(order="C")],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WhiteningTransform":
        dim = int(d["dim"])
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            W=np.asarray(d["W"], dtype=np.float64).reshape(dim, dim),
            eps=float(d["eps"]),
            source_count=int(d["source_count"]),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "WhiteningTransform":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _as_samples(samples) -> np.ndarray:
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch("samples must form an (n, dim) array of uniform dimension")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("samples contain NaN or infinite values")
    return X


def fit_zca(samples, eps: float = 1e-5) -> WhiteningTransform:
    """Fit W = U (L + eps I)^(-1/2) U^T from the sample covariance (n-1).

    Eigenvalues are clipped at zero before regularization; with ``eps = 0``
    a rank-deficient covariance raises ``SingularCovariance``.
    """
    X = _as_samples(samples)
    n = X.shape[0]
    if n < 2:
        raise TooFewSamples(f"ZCA needs at least 2 samples, got {n}")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    evals, U = np.linalg.eigh(cov)
    evals = np.clip(evals, 0.0, None) + eps
    if np.any(evals <= 0):
        raise SingularCovariance(
            "covariance is rank-deficient; use eps > 0 to regularize"
        )
    W = (U * (1.0 / np.sqrt(evals))) @ U.T
    W = 0.5 * (W + W.T)
    return WhiteningTransform(mean=mean, W=W, eps=float(eps), source_count=n)


def apply_whitening(t: WhiteningTransform, vectors) -> np.ndarray:
    """y = W (x - mean) for each row; NaN rows stay NaN."""
    X = np.asarray(vectors, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != t.dim:
        raise DimensionMismatch(f"vectors have dimension {X.shape[1]}, transform expects {t.dim}")
    Y = (X - t.mean) @ t.W.T
    return Y[0] if single else Y


def verify_isotropy(whitened) -> dict:
    """Max |off-diagonal| and max |diagonal - 1| of the sample covariance."""
    Y = _as_samples(whitened)
    n, d = Y.shape
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    rank_deficient = n <= d
    if rank_deficient:
        warnings.warn(
            f"{n} samples in {d} dimensions: covariance is rank-deficient and cannot be identity",
            stacklevel=2,
        )
    cov = np.cov(Y, rowvar=False, ddof=1)
    off = cov - np.diag(np.diag(cov))
    return {
        "max_abs_offdiag": float(np.max(np.abs(off))) if d > 1 else 0.0,
        "max_abs_diag_minus_one": float(np.max(np.abs(np.diag(cov) - 1.0))),
        "n_samples": n,
        "dim": d,
        "rank_deficient": rank_deficient,
    }


def whiten_trajectories(trajectories, eps: float = 1e-5):
    """Fit one transform on all present points of ``trajectories`` and apply it.

    The caller is responsible for passing one (dataset, backend, prefix mode)
    scope at a time. Returns ``(whitened_trajectories, transform, diagnostics)``.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise TooFewSamples("no trajectories to whiten")
    samples = np.vstack([t.vectors[~t.missing] for t in trajectories])
    transform = fit_zca(samples, eps)
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        diag = verify_isotropy(apply_whitening(transform, samples))
    out = []
    for t in trajectories:
        vecs = np.full_like(t.vectors, np.nan)
        present = ~t.missing
        if present.any():
            vecs[present] = apply_whitening(transform, t.vectors[present])
        out.append(t.with_vectors(vecs))
    return out, transform, diag
