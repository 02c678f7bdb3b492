"""Group comparisons and correlation matrices over per-trajectory summaries.

Pairwise Welch t-tests with Holm adjustment stand in for mixed-model
post-hoc contrasts; every report records this through ``METHOD_NOTE``.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .errors import DegenerateGroup, EmptyInput, InsufficientOverlap, LengthMismatch, TooShort, ZeroPooledSD

METHOD_NOTE = (
    "pairwise Welch t-tests on per-trajectory summaries, Holm-adjusted within each metric; "
    "no mixed-effects model (participant/concept random effects not modelled)"
)
WEIGHT_THRESHOLDS = ((1e-4, 4), (1e-3, 3), (1e-2, 2), (0.05, 1))
WEIGHT_NOTE = "weights: 4 if p<1e-4, 3 if p<1e-3, 2 if p<0.01, 1 if p<0.05, else 0 (assumed cut points)"


@dataclass
class ComparisonResult:
    metric: str
    group_a: str
    group_b: str
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float
    t_statistic: float
    degrees_of_freedom: float
    p_raw: float
    p_adjusted: float = float("nan")
    cohens_d: float = float("nan")
    weight: int = 0
    n_dropped: int = 0

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in asdict(self).items()}


def _clean(values: Iterable) -> tuple[np.ndarray, int]:
    raw = [v for v in values]
    kept = [float(v) for v in raw if v is not None and math.isfinite(float(v))]
    return np.asarray(kept, dtype=np.float64), len(raw) - len(kept)


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """(mean_a - mean_b) / pooled SD with (n_a - 1, n_b - 1) weights."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise DegenerateGroup(f"Cohen's d needs n >= 2 per group, got {na} and {nb}")
    pooled_var = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    if not pooled_var > 0:
        raise ZeroPooledSD("pooled standard deviation is zero")
    return float((a.mean() - b.mean()) / math.sqrt(pooled_var))


def welch_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, float]:
    """Welch's t, Welch-Satterthwaite df and two-sided p-value."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise DegenerateGroup(f"Welch test needs n >= 2 per group, got {na} and {nb}")
    va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
    se2 = va + vb
    diff = a.mean() - b.mean()
    if se2 == 0:
        if diff == 0:
            return 0.0, float("nan"), 1.0
        return math.copysign(math.inf, diff), float("nan"), 0.0
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (na - 1) + vb ** 2 / (nb - 1))
    p = 2.0 * float(sps.t.sf(abs(t), df))
    return float(t), float(df), min(1.0, p)


def holm_adjust(pvalues: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, capped at 1, in input order."""
    p = np.asarray(pvalues, dtype=np.float64)
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p[idx])
        adjusted[idx] = min(1.0, running)
    return adjusted.tolist()


def significance_weight(p_adjusted: float) -> int:
    if not 0.0 <= p_adjusted <= 1.0:
        raise ValueError(f"p-value out of range: {p_adjusted}")
    for cut, w in WEIGHT_THRESHOLDS:
        if p_adjusted < cut:
            return w
    return 0


def welch_pairwise(values: Mapping[str, Iterable[float]], metric: str = "") -> list[ComparisonResult]:
    """All unordered group pairs, Holm-adjusted as one family.

    ``None`` and non-finite values are dropped per group and counted in
    ``n_dropped``. Groups are paired in sorted label order.
    """
    cleaned = {}
    dropped = {}
    for g in sorted(values):
        cleaned[g], dropped[g] = _clean(values[g])
    if len(cleaned) < 2:
        raise DegenerateGroup("need at least two groups to compare")
    for g, arr in cleaned.items():
        if arr.size < 2:
            raise DegenerateGroup(f"group {g!r} has {arr.size} usable values (need >= 2)")

    results = []
    for ga, gb in itertools.combinations(sorted(cleaned), 2):
        a, b = cleaned[ga], cleaned[gb]
        t, df, p = welch_test(a, b)
        try:
            d = cohens_d(a, b)
        except ZeroPooledSD:
            diff = a.mean() - b.mean()
            d = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        results.append(ComparisonResult(
            metric, ga, gb, int(a.size), int(b.size), float(a.mean()), float(b.mean()),
            t, df, p, cohens_d=d, n_dropped=dropped[ga] + dropped[gb],
        ))
    for res, padj in zip(results, holm_adjust([r.p_raw for r in results])):
        res.p_adjusted = padj
        res.weight = significance_weight(padj)
    return results


@dataclass
class ComparisonSummary:
    n_significant_pairs: int
    weighted_count: int
    mean_abs_d: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def comparison_summary(results: Sequence[ComparisonResult]) -> ComparisonSummary:
    """Count of significant pairs, sum of weights, mean |d| over finite d."""
    if not results:
        raise EmptyInput("no comparison results to summarize")
    ds = [abs(r.cohens_d) for r in results if math.isfinite(r.cohens_d)]
    return ComparisonSummary(
        n_significant_pairs=sum(1 for r in results if r.weight > 0),
        weighted_count=sum(r.weight for r in results),
        mean_abs_d=float(np.mean(ds)) if ds else None,
    )


def pearson(x: Sequence[float | None], y: Sequence[float | None]) -> float | None:
    """Sample Pearson r after listwise deletion; ``None`` for zero variance."""
    if len(x) != len(y):
        raise LengthMismatch(f"pearson got sequences of length {len(x)} and {len(y)}")
    pairs = [(float(a), float(b)) for a, b in zip(x, y)
             if a is not None and b is not None and math.isfinite(float(a)) and math.isfinite(float(b))]
    if len(pairs) < 3:
        raise TooShort(f"pearson needs at least 3 complete pairs, got {len(pairs)}")
    xa = np.array([p[0] for p in pairs])
    ya = np.array([p[1] for p in pairs])
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        return None
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass
class CorrelationMatrix:
    labels: list[tuple[str, str]]
    values: np.ndarray
    n: np.ndarray
    dropped: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "labels": [{"metric": m, "backend": b} for m, b in self.labels],
            "values": [[None if not math.isfinite(v) else float(v) for v in row] for row in self.values],
            "n": self.n.astype(int).tolist(),
        }

    def cell(self, a: tuple[str, str], b: tuple[str, str]) -> float:
        return float(self.values[self.labels.index(a), self.labels.index(b)])


def cross_model_matrix(
    rows: Iterable[Mapping],
    metrics: Sequence[str],
    *,
    key_fields: Sequence[str] = ("dataset", "participant_id", "concept"),
    backend_field: str = "backend",
    backends: Sequence[str] | None = None,
) -> CorrelationMatrix:
    """Pearson r between every (metric, backend) pair, aligned on stream keys.

    Each cell uses the streams where both columns are defined; ``n`` holds
    the per-cell pair count. Undefined correlations are NaN.
    """
    table: dict[str, dict[tuple, Mapping]] = defaultdict(dict)
    for row in rows:
        table[row[backend_field]][tuple(row[k] for k in key_fields)] = row
    if backends is None:
        backends = sorted(table)
    missing = [b for b in backends if b not in table]
    if missing:
        raise InsufficientOverlap(f"no metric rows for backend(s) {missing}")
    if len(backends) < 2:
        raise InsufficientOverlap(f"need at least two backends, got {list(backends)}")
    common = set.intersection(*(set(table[b]) for b in backends))
    if len(common) < 3:
        raise InsufficientOverlap(f"backends {list(backends)} share only {len(common)} streams (need >= 3)")
    keys = sorted(common)

    labels = [(m, b) for m in metrics for b in backends]
    cols = {lab: [table[lab[1]][k].get(lab[0]) for k in keys] for lab in labels}
    size = len(labels)
    values = np.full((size, size), np.nan)
    n = np.zeros((size, size), dtype=int)
    for i, j in itertools.combinations_with_replacement(range(size), 2):
        x, y = cols[labels[i]], cols[labels[j]]
        ok = sum(1 for a, b in zip(x, y) if a is not None and b is not None
                 and math.isfinite(a) and math.isfinite(b))
        n[i, j] = n[j, i] = ok
        if ok < 3:
            continue
        r = pearson(x, y)
        if r is not None:
            values[i, j] = values[j, i] = 1.0 if i == j else r
    dropped = {f"{m}|{b}": sum(1 for v in cols[(m, b)] if v is None) for m, b in labels}
    return CorrelationMatrix(labels, values, n, dropped)


def group_summary_table(
    rows: Iterable[Mapping],
    metrics: Sequence[str],
    *,
    group_field: str = "group",
    scope_fields: Sequence[str] = ("dataset", "backend", "prefix_mode"),
) -> tuple[list[tuple[tuple, ComparisonResult]], list[dict]]:
    """Per-metric Welch comparisons summed into one line per scope.

    Returns ``(scope, ComparisonResult)`` pairs and one summary dict per
    scope: n_pairs, weighted_count, and mean_abs_d averaged over metrics.
    Metrics whose groups are too small to test are skipped.
    """
    scoped: dict[tuple, list[Mapping]] = defaultdict(list)
    for row in rows:
        scoped[tuple(row[f] for f in scope_fields)].append(row)

    all_results = []
    summaries = []
    for scope in sorted(scoped):
        scope_rows = scoped[scope]
        per_metric = []
        for metric in metrics:
            by_group: dict[str, list] = defaultdict(list)
            for row in scope_rows:
                by_group[row[group_field]].append(row.get(metric))
            try:
                res = welch_pairwise(by_group, metric)
            except DegenerateGroup:
                continue
            per_metric.append((metric, res))
            for r in res:
                all_results.append((scope, r))
        if not per_metric:
            continue
        flat = [r for _, res in per_metric for r in res]
        per_metric_d = [comparison_summary(res).mean_abs_d for _, res in per_metric]
        per_metric_d = [d for d in per_metric_d if d is not None]
        summaries.append({
            **dict(zip(scope_fields, scope)),
            "n_pairs": sum(1 for r in flat if r.weight > 0),
            "weighted_count": sum(r.weight for r in flat),
            "mean_abs_d": float(np.mean(per_metric_d)) if per_metric_d else None,
            "n_metrics": len(per_metric),
        })
    return all_results, summaries
