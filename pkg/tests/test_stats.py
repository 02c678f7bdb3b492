import math
import random

import numpy as np
import oracles
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from semtraj.errors import DegenerateGroup, EmptyInput, InsufficientOverlap, LengthMismatch, TooShort, ZeroPooledSD
from semtraj.stats import (
    ComparisonResult,
    cohens_d,
    comparison_summary,
    cross_model_matrix,
    holm_adjust,
    pearson,
    significance_weight,
    group_summary_table,
    welch_pairwise,
    welch_test,
)


def test_identical_groups():
    (res,) = welch_pairwise({"a": [1, 2, 3], "b": [1, 2, 3]})
    assert res.cohens_d == 0.0
    assert res.p_raw == 1.0 and res.p_adjusted == 1.0
    assert res.weight == 0


def test_shifted_groups_d_three():
    (res,) = welch_pairwise({"a": [1, 2, 3], "b": [4, 5, 6]}, "m")
    assert abs(res.cohens_d) == pytest.approx(3.0, abs=1e-12)
    assert res.mean_b - res.mean_a == 3.0


def test_cohens_d_examples():
    assert cohens_d([1, 2, 3], [3, 1, 2]) == 0.0
    assert cohens_d([1, 2, 3], [4, 5, 6]) == pytest.approx(-3.0, abs=1e-12)
    with pytest.raises(ZeroPooledSD):
        cohens_d([0, 0], [0, 0])
    with pytest.raises(DegenerateGroup):
        cohens_d([1], [1, 2])


def test_zero_variance_equal_means():
    (res,) = welch_pairwise({"a": [2, 2, 2], "b": [2, 2]})
    assert res.p_raw == 1.0 and res.cohens_d == 0.0


def test_degenerate_groups():
    with pytest.raises(DegenerateGroup):
        welch_pairwise({"a": [1, 2, 3]})
    with pytest.raises(DegenerateGroup):
        welch_pairwise({"a": [1, 2, 3], "b": [1]})


def test_undefined_values_dropped_and_counted():
    (res,) = welch_pairwise({"a": [1, 2, None, 3], "b": [4, float("nan"), 5, 6]})
    assert (res.n_a, res.n_b, res.n_dropped) == (3, 3, 2)


def test_three_groups_holm_against_brute_force():
    groups = {"x": [1.0, 2.5, 3.1, 2.2], "y": [2.0, 4.5, 3.9, 5.2, 4.4], "z": [1.1, 1.9, 2.4]}
    res = welch_pairwise(groups, "m")
    assert [(r.group_a, r.group_b) for r in res] == oracles.all_pairs(groups)
    raw = [sps.ttest_ind(groups[r.group_a], groups[r.group_b], equal_var=False).pvalue for r in res]
    for r, p_ref, adj_ref in zip(res, raw, oracles.holm(raw)):
        assert r.p_raw == pytest.approx(p_ref, abs=1e-12)
        assert r.p_adjusted == pytest.approx(adj_ref, abs=1e-12)


@settings(max_examples=200)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=10))
def test_holm_properties(ps):
    adj = holm_adjust(ps)
    assert all(a >= p - 1e-15 for a, p in zip(adj, ps))
    assert all(a <= 1.0 for a in adj)
    assert adj == pytest.approx(oracles.holm(ps), abs=1e-15)


def test_holm_matches_statsmodels():
    multipletests = pytest.importorskip("statsmodels.stats.multitest").multipletests
    ps = [0.01, 0.04, 0.03, 0.005, 0.2]
    np.testing.assert_allclose(holm_adjust(ps), multipletests(ps, method="holm")[1], atol=1e-15)


group = st.lists(st.integers(-10_000, 10_000).map(lambda k: k / 100), min_size=2, max_size=8)


@settings(max_examples=200)
@given(group, group)
def test_welch_and_d_match_brute_force(a, b):
    if oracles.var(a) == 0 or oracles.var(b) == 0:
        return
    t, df, p = welch_test(a, b)
    t_ref, df_ref = oracles.welch_t_df(a, b)
    assert t == pytest.approx(t_ref, rel=1e-9, abs=1e-10)
    assert df == pytest.approx(df_ref, rel=1e-9, abs=1e-10)
    assert p == pytest.approx(sps.ttest_ind(a, b, equal_var=False).pvalue, rel=1e-8, abs=1e-10)
    assert cohens_d(a, b) == pytest.approx(oracles.cohens_d(a, b), rel=1e-9, abs=1e-10)


@settings(max_examples=100)
@given(group, group)
def test_pairwise_symmetry(a, b):
    if oracles.var(a) == 0 or oracles.var(b) == 0:
        return
    (ab,) = welch_pairwise({"a": a, "b": b})
    (ba,) = welch_pairwise({"a": b, "b": a})
    assert ab.cohens_d == pytest.approx(-ba.cohens_d, rel=1e-12, abs=1e-12)
    assert ab.p_raw == pytest.approx(ba.p_raw, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("p,w", [(0.2, 0), (0.05, 0), (0.03, 1), (0.005, 2), (0.0005, 3), (0.00005, 4), (0.0, 4), (1.0, 0)])
def test_significance_weight(p, w):
    assert significance_weight(p) == w


def _res(weight, d):
    return ComparisonResult("m", "a", "b", 3, 3, 0.0, 0.0, 0.0, 1.0, 0.5, 0.5, d, weight)


def test_comparison_summary():
    s = comparison_summary([_res(1, 0.5), _res(4, -1.5), _res(0, 0.1)])
    assert (s.n_significant_pairs, s.weighted_count) == (2, 5)
    assert s.mean_abs_d == pytest.approx(0.7)
    assert comparison_summary([_res(0, 1.0)]).n_significant_pairs == 0
    with pytest.raises(EmptyInput):
        comparison_summary([])


@given(st.permutations([_res(1, 0.5), _res(4, -1.5), _res(0, 0.1), _res(2, 0.3)]))
def test_summary_permutation_invariant(perm):
    s = comparison_summary(perm)
    assert (s.n_significant_pairs, s.weighted_count) == (3, 7)
    assert s.mean_abs_d == pytest.approx(0.6, abs=1e-15)


def test_pearson_examples():
    xs = [1.0, 2.0, 3.0, 4.0]
    assert pearson(xs, [2 * x + 1 for x in xs]) == 1.0
    assert pearson(xs, [-x for x in xs]) == -1.0
    assert pearson(xs, [1, 3, 2, 4]) == 0.8
    assert pearson(xs, [5, 5, 5, 5]) is None
    assert pearson([1, 2, None, 4, 5], [2, 4, 100, 8, 10.5]) == pytest.approx(
        oracles.pearson([1, 2, 4, 5], [2, 4, 8, 10.5]), abs=1e-15)
    with pytest.raises(LengthMismatch):
        pearson([1, 2, 3], [1, 2])
    with pytest.raises(TooShort):
        pearson([1, 2], [1, 2])


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=3, max_size=12),
       st.floats(0.1, 10), st.floats(-5, 5))
def test_pearson_affine_invariant(pairs, scale, shift):
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    r = pearson(x, y)
    if r is None or oracles.var(x) < 1e-6 or oracles.var(y) < 1e-6:
        return
    assert pearson([scale * v + shift for v in x], y) == pytest.approx(r, abs=1e-9)
    assert r == pytest.approx(oracles.pearson(x, y), abs=1e-10)


# ---------------------------------------------------------------- matrices

def _rows(backend, values_by_metric, n):
    return [{"dataset": "d", "participant_id": f"p{i}", "concept": "c", "backend": backend,
             **{m: v[i] for m, v in values_by_metric.items()}} for i in range(n)]


def test_matrix_duplicate_backend_all_ones():
    rng = random.Random(0)
    vals = {"dist_next": [rng.random() for _ in range(10)], "entropy": [rng.random() for _ in range(10)]}
    mat = cross_model_matrix(_rows("A", vals, 10) + _rows("B", vals, 10), ["dist_next", "entropy"])
    assert mat.cell(("dist_next", "A"), ("dist_next", "B")) == pytest.approx(1.0, abs=1e-12)
    assert mat.cell(("entropy", "A"), ("entropy", "B")) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(np.diag(mat.values), 1.0)
    np.testing.assert_allclose(mat.values, mat.values.T)
    assert np.all(np.abs(mat.values) <= 1.0)


def test_matrix_independent_backends_cross_block_small():
    rng = np.random.default_rng(5)
    n = 2000
    a = {"dist_next": rng.normal(size=n).tolist()}
    b = {"dist_next": rng.normal(size=n).tolist()}
    mat = cross_model_matrix(_rows("A", a, n) + _rows("B", b, n), ["dist_next"])
    assert abs(mat.cell(("dist_next", "A"), ("dist_next", "B"))) < 0.1
    assert mat.n[0, 1] == n


def test_matrix_undefined_values_dropped_per_cell():
    a = {"entropy": [0.1, None, 0.5, 0.9, 0.3]}
    b = {"entropy": [0.2, 0.4, 0.6, None, 0.1]}
    mat = cross_model_matrix(_rows("A", a, 5) + _rows("B", b, 5), ["entropy"])
    assert mat.n[0, 1] == 3
    assert mat.n[0, 0] == 4
    assert mat.dropped == {"entropy|A": 1, "entropy|B": 1}


def test_matrix_insufficient_overlap():
    vals = {"m": [0.1, 0.2, 0.3]}
    with pytest.raises(InsufficientOverlap):
        cross_model_matrix(_rows("A", vals, 3), ["m"])
    with pytest.raises(InsufficientOverlap):
        cross_model_matrix(_rows("A", vals, 3) + _rows("B", vals, 3), ["m"], backends=["A", "C"])
    rows_b = _rows("B", vals, 3)
    for r in rows_b:
        r["participant_id"] += "x"
    with pytest.raises(InsufficientOverlap):
        cross_model_matrix(_rows("A", vals, 3) + rows_b, ["m"])


def test_group_summary_table_shape():
    rng = np.random.default_rng(9)
    rows = []
    for g, shift in (("A", 0.0), ("B", 0.0), ("C", 3.0)):
        for i in range(12):
            rows.append({"dataset": "d", "backend": "b", "prefix_mode": "cumulative", "group": g,
                         "m1": rng.normal() + shift, "m2": rng.normal()})
    results, summaries = group_summary_table(rows, ["m1", "m2"])
    assert len(results) == 6
    (s,) = summaries
    flat = [r for _, r in results]
    assert s["n_pairs"] == sum(1 for r in flat if r.weight > 0)
    assert s["weighted_count"] == sum(r.weight for r in flat)
    per_metric = [np.mean([abs(r.cohens_d) for r in flat if r.metric == m]) for m in ("m1", "m2")]
    assert s["mean_abs_d"] == pytest.approx(np.mean(per_metric), abs=1e-12)
    m1 = {(r.group_a, r.group_b): r.weight for r in flat if r.metric == "m1"}
    assert m1[("A", "C")] >= 1 and m1[("B", "C")] >= 1
    assert math.isfinite(s["mean_abs_d"])
