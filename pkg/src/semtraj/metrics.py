"""Trajectory metrics: distance to next, binarized entropy, velocity,
acceleration and distance to centroid.

Cosine-based metrics work on unit-normalized embeddings; velocity and
acceleration are finite differences of the raw embeddings.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .embed.trajectory import EmbeddedTrajectory
from .errors import DataError, DimensionMismatch, EmptySet, TooShort, ZeroCentroid, ZeroVector

ZERO_NORM = 1e-12


@dataclass
class StepSeries:
    """Per-step values; invalid steps hold NaN and are excluded from summaries."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape != self.valid.shape:
            raise DataError("valid mask must match values")

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "StepSeries":
        arr = np.asarray(list(values), dtype=np.float64)
        return cls(arr, np.isfinite(arr))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def valid_values(self) -> np.ndarray:
        return self.values[self.valid]

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    def mean(self) -> float | None:
        v = self.valid_values
        return float(v.mean()) if v.size else None


def _as_series(series) -> StepSeries:
    return series if isinstance(series, StepSeries) else StepSeries.from_values(series)


def unit_normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if not norm > ZERO_NORM:
        raise ZeroVector("cannot normalize a zero vector")
    return v / norm


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), clamped to [0, 2]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot compare vectors of shape {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if not (na > ZERO_NORM and nb > ZERO_NORM):
        raise ZeroVector("cosine distance is undefined for a zero vector")
    d = 1.0 - float(np.dot(a, b)) / (na * nb)
    return min(2.0, max(0.0, d))


def _normalized_rows(traj: EmbeddedTrajectory) -> np.ndarray:
    out = np.full_like(traj.vectors, np.nan)
    for i in np.flatnonzero(~traj.missing):
        out[i] = unit_normalize(traj.vectors[i])
    return out


def distance_to_next(traj: EmbeddedTrajectory) -> tuple[StepSeries, float | None]:
    """Cosine distance between successive unit-normalized points.

    Returns the N-1 step series and its mean over valid steps (``None``
    when no step is valid).
    """
    if traj.n < 2:
        raise TooShort(f"distance_to_next needs N >= 2, got {traj.n}")
    unit = _normalized_rows(traj)
    present = ~traj.missing
    valid = present[:-1] & present[1:]
    values = np.full(traj.n - 1, np.nan)
    for t in np.flatnonzero(valid):
        values[t] = cosine_distance(unit[t], unit[t + 1])
    series = StepSeries(values, valid)
    return series, series.mean()


def binarized_entropy(series, *, per_step: bool = False) -> float | None:
    """Shannon entropy (bits) of the median-split step series.

    Steps at or above the median count as "high". Returns ``None`` when
    fewer than three valid steps exist. With ``per_step=True`` the entropy
    is divided by the number of valid steps.
    """
    x = _as_series(series).valid_values
    n = x.size
    if n < 3:
        return None
    theta = float(np.median(x))
    p = float(np.count_nonzero(x >= theta)) / n
    if p <= 0.0 or p >= 1.0:
        h = 0.0
    else:
        h = -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)
    return h / n if per_step else h


def approximate_entropy(series, m: int = 2, r: float | None = None) -> float:
    """Approximate entropy ApEn(m, r) of the valid steps.

    Windows are compared with the Chebyshev distance, self-matches
    included. ``r`` defaults to 0.2 times the population SD of the series.
    """
    x = _as_series(series).valid_values
    n = x.size
    if m < 1:
        raise DataError("embedding dimension m must be >= 1")
    if n < m + 2:
        raise TooShort(f"approximate entropy with m={m} needs at least {m + 2} values, got {n}")
    if r is None:
        r = 0.2 * float(np.std(x))

    def phi(k: int) -> float:
        windows = np.lib.stride_tricks.sliding_window_view(x, k)
        dist = np.max(np.abs(windows[:, None, :] - windows[None, :, :]), axis=2)
        counts = np.count_nonzero(dist <= r, axis=1) / windows.shape[0]
        return float(np.mean(np.log(counts)))

    return phi(m) - phi(m + 1)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise DataError(f"time scale alpha must be positive and finite, got {alpha}")
    return alpha


def _kinematics(diff: np.ndarray, scale: float, valid: np.ndarray):
    vectors = scale * diff
    # magnitude = scale * |diff| so rescaling alpha rescales magnitudes exactly
    mags = np.full(diff.shape[0], np.nan)
    if valid.any():
        mags[valid] = scale * np.linalg.norm(diff[valid], axis=1)
    series = StepSeries(mags, valid)
    return vectors, series, series.mean()


def velocity(traj: EmbeddedTrajectory, alpha: float = 1.0):
    """v_t = alpha * (x_{t+1} - x_t) on raw embeddings.

    Returns ``(vectors, magnitudes, mean_magnitude)``; vectors has N-1 rows.
    """
    alpha = _check_alpha(alpha)
    if traj.n < 2:
        raise TooShort(f"velocity needs N >= 2, got {traj.n}")
    x = traj.vectors
    present = ~traj.missing
    return _kinematics(x[1:] - x[:-1], alpha, present[:-1] & present[1:])


def acceleration(traj: EmbeddedTrajectory, alpha: float = 1.0):
    """a_t = alpha^2 * (x_{t+2} - 2 x_{t+1} + x_t); N-2 rows."""
    alpha = _check_alpha(alpha)
    if traj.n < 3:
        raise TooShort(f"acceleration needs N >= 3, got {traj.n}")
    x = traj.vectors
    present = ~traj.missing
    valid = present[:-2] & present[1:-1] & present[2:]
    return _kinematics(x[2:] - 2.0 * x[1:-1] + x[:-2], alpha * alpha, valid)


def distance_to_centroid(
    trajectories: Sequence[EmbeddedTrajectory],
    labels: Sequence[Sequence[str]] | None = None,
    item_vectors: Sequence[np.ndarray] | None = None,
) -> list[StepSeries]:
    """Cosine distance of every item to the centroid of unique properties.

    ``trajectories`` are all trials of one (participant, concept). Each
    label keeps only the first available embedding; the centroid is the
    mean of those unit-normalized embeddings. Every item, repeats
    included, gets a distance to it.

    Args:
        trajectories: trials sharing backend and dimension.
        labels: per-trial item labels; defaults to each trajectory's items.
        item_vectors: per-trial (N, dim) arrays to use instead of the
            trajectory points, e.g. standalone item embeddings. NaN rows
            are treated as missing.

    Returns:
        One length-N series per trajectory.
    """
    if not trajectories:
        raise EmptySet("distance_to_centroid needs at least one trajectory")
    backends = {t.backend_id for t in trajectories}
    dims = {t.dim for t in trajectories}
    if len(backends) > 1 or len(dims) > 1:
        raise DimensionMismatch(f"trajectories mix backends {backends} / dimensions {dims}")

    if labels is None:
        labels = [t.items if t.items else [f"{i}:{j}" for j in range(t.n)] for i, t in enumerate(trajectories)]
    if len(labels) != len(trajectories):
        raise DataError("need one label list per trajectory")
    if item_vectors is None:
        mats = [np.where(t.missing[:, None], np.nan, t.vectors) for t in trajectories]
    else:
        mats = [np.asarray(v, dtype=np.float64) for v in item_vectors]
        if len(mats) != len(trajectories):
            raise DataError("need one item-vector array per trajectory")
    for lab, mat, t in zip(labels, mats, trajectories):
        if len(lab) != t.n or mat.shape != (t.n, t.dim):
            raise DataError(f"labels/vectors do not align with trajectory {t.key}")

    first: dict[str, np.ndarray] = {}
    for lab, mat in zip(labels, mats):
        for label, vec in zip(lab, mat):
            if label not in first and np.all(np.isfinite(vec)):
                first[label] = unit_normalize(vec)
    if not first:
        raise EmptySet("no embedded items to build a centroid from")
    centroid = np.mean(list(first.values()), axis=0)
    if np.linalg.norm(centroid) < ZERO_NORM:
        raise ZeroCentroid("centroid of unique properties has (near) zero norm")

    out = []
    for mat in mats:
        valid = np.all(np.isfinite(mat), axis=1)
        values = np.full(mat.shape[0], np.nan)
        for i in np.flatnonzero(valid):
            values[i] = cosine_distance(mat[i], centroid)
        out.append(StepSeries(values, valid))
    return out


@dataclass
class TrajectoryMetrics:
    dataset_id: str
    participant_id: str
    group: str
    concept: str
    backend_id: str
    prefix_mode: str
    n_items: int
    dist_next: StepSeries | None
    dist_next_mean: float | None
    entropy: float | None
    velocity_mag: StepSeries | None
    velocity_mean: float | None
    accel_mag: StepSeries | None
    accel_mean: float | None
    dist_centroid: StepSeries | None
    dist_centroid_mean: float | None
    alpha: float = 1.0
    apen: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.dataset_id, self.participant_id, self.concept)

    def row(self) -> dict:
        return {
            "dataset": self.dataset_id,
            "participant_id": self.participant_id,
            "group": self.group,
            "concept": self.concept,
            "backend": self.backend_id,
            "prefix_mode": self.prefix_mode,
            "n_items": self.n_items,
            "dist_next": self.dist_next_mean,
            "entropy": self.entropy,
            "velocity": self.velocity_mean,
            "acceleration": self.accel_mean,
            "dist_centroid": self.dist_centroid_mean,
            "apen": self.apen,
        }

    def step_rows(self) -> list[dict]:
        """Long-format per-step values (one row per metric and step)."""
        base = {k: v for k, v in self.row().items() if k in ("dataset", "participant_id", "group", "concept", "backend", "prefix_mode")}
        rows = []
        for name, series in (("dist_next", self.dist_next), ("velocity", self.velocity_mag),
                             ("acceleration", self.accel_mag), ("dist_centroid", self.dist_centroid)):
            if series is None:
                continue
            for t, (v, ok) in enumerate(zip(series.values, series.valid), start=1):
                rows.append({**base, "metric": name, "step": t, "value": float(v) if ok else None})
        return rows


SUMMARY_METRICS = ("dist_next", "entropy", "velocity", "acceleration", "dist_centroid")


def summarize(
    traj: EmbeddedTrajectory,
    dist_centroid: StepSeries | None = None,
    *,
    alpha: float = 1.0,
    entropy_per_step: bool = False,
    apen_m: int | None = None,
    apen_r: float | None = None,
) -> TrajectoryMetrics:
    """All five metrics for one trajectory.

    Series that need more points than the trajectory has are ``None``, as
    is entropy with fewer than three valid steps. ``dist_centroid`` comes
    from :func:`distance_to_centroid` over the trajectory's trial set; if
    omitted the trajectory is its own set. ``apen_m`` turns on approximate
    entropy of the step series.
    """
    dn = dn_mean = ent = vel = vel_mean = acc = acc_mean = apen = None
    if traj.n >= 2:
        dn, dn_mean = distance_to_next(traj)
        ent = binarized_entropy(dn, per_step=entropy_per_step)
        _, vel, vel_mean = velocity(traj, alpha)
        if apen_m is not None and dn.n_valid >= apen_m + 2:
            apen = approximate_entropy(dn, apen_m, apen_r)
    if traj.n >= 3:
        _, acc, acc_mean = acceleration(traj, alpha)
    if dist_centroid is None:
        try:
            dist_centroid = distance_to_centroid([traj])[0]
        except (EmptySet, ZeroCentroid):
            dist_centroid = None
    dc_mean = dist_centroid.mean() if dist_centroid is not None else None
    return TrajectoryMetrics(
        traj.dataset_id, traj.participant_id, traj.group, traj.concept, traj.backend_id,
        traj.prefix_mode.value, traj.n, dn, dn_mean, ent, vel, vel_mean, acc, acc_mean,
        dist_centroid, dc_mean, alpha, apen,
    )


def summarize_all(
    trajectories: Sequence[EmbeddedTrajectory],
    *,
    alpha: float = 1.0,
    entropy_per_step: bool = False,
    apen_m: int | None = None,
    apen_r: float | None = None,
    standalone: Sequence[EmbeddedTrajectory] | None = None,
) -> list[TrajectoryMetrics]:
    """Summaries for many trajectories with centroids per (participant, concept).

    ``standalone`` optionally supplies non-cumulative trajectories of the
    same streams whose per-item embeddings feed the centroid metric.
    """
    scopes: dict[tuple, list[int]] = defaultdict(list)
    for i, t in enumerate(trajectories):
        scopes[(t.dataset_id, t.participant_id, t.concept, t.backend_id, t.prefix_mode)].append(i)
    by_key = {}
    if standalone is not None:
        by_key = {(s.dataset_id, s.participant_id, s.concept): s for s in standalone}

    centroid_series: dict[int, StepSeries | None] = {}
    for idxs in scopes.values():
        group = [trajectories[i] for i in idxs]
        item_vectors = None
        if standalone is not None:
            try:
                item_vectors = [np.where(by_key[t.key].missing[:, None], np.nan, by_key[t.key].vectors)
                                for t in group]
            except KeyError as exc:
                raise DataError(f"no standalone embeddings for stream {exc.args[0]}") from None
        try:
            series = distance_to_centroid(group, item_vectors=item_vectors)
        except (EmptySet, ZeroCentroid):
            series = [None] * len(group)
        centroid_series.update(zip(idxs, series))

    return [
        summarize(t, centroid_series[i], alpha=alpha, entropy_per_step=entropy_per_step,
                  apen_m=apen_m, apen_r=apen_r)
        for i, t in enumerate(trajectories)
    ]
