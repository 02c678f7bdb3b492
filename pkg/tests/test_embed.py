import json
import threading

import httpx
import numpy as np
import pytest
from conftest import VEC_FIXTURE, HashBackend
from hypothesis import given, settings
from hypothesis import strategies as st

from semtraj.datamodel import ConceptStream
from semtraj.embed import (
    EmbeddingCache,
    HttpBackend,
    PrefixMode,
    StaticBackend,
    build_prefixes,
    embed_stream,
    embed_texts,
    lookup_static,
    parse_vector_table,
    read_trajectories,
    resolve_backend,
    write_trajectories,
)
from semtraj.errors import (
    AllTokensOutOfVocabulary,
    AuthMissing,
    BackendUnavailable,
    BadHeader,
    BadVectorArity,
    ConfigError,
    DimensionMismatch,
    NonNumericComponent,
    UnknownBackend,
)
from semtraj.metrics import distance_to_next, summarize


def stream(*items):
    return ConceptStream("ds", "p1", "g", "c", tuple(items))


# ---------------------------------------------------------------- prefixes

def test_cumulative_prefixes():
    assert build_prefixes(stream("cat", "dog"), PrefixMode.CUMULATIVE) == ["cat", "cat dog"]
    assert build_prefixes(stream("a", "b", "c"), "cumulative") == ["a", "a b", "a b c"]


def test_non_cumulative_prefixes():
    assert build_prefixes(stream("cat", "dog"), "non-cumulative") == ["cat", "dog"]


def test_bad_mode():
    with pytest.raises(ConfigError):
        PrefixMode.parse("sideways")


word = st.text(st.characters(whitelist_categories=("L", "N")), min_size=1, max_size=8)


@given(st.lists(word, min_size=1, max_size=12))
def test_cumulative_prefix_is_strict_textual_prefix(items):
    out = build_prefixes(stream(*items), "cumulative")
    assert len(out) == len(items)
    for a, b in zip(out, out[1:]):
        assert b.startswith(a) and len(b) > len(a)


# ---------------------------------------------------------------- vector table

def test_parse_vec():
    table = parse_vector_table(VEC_FIXTURE)
    assert table.dimension == 3
    assert set(table.entries) == {"foo", "bar"}
    np.testing.assert_array_equal(table.entries["foo"], [0.1, 0.2, 0.3])


def test_parse_vec_bytes_and_trailing_space():
    table = parse_vector_table(b"1 2\nfoo 1 2 \n")
    np.testing.assert_array_equal(table.entries["foo"], [1.0, 2.0])


def test_parse_vec_arity():
    with pytest.raises(BadVectorArity) as exc:
        parse_vector_table("2 3\nfoo 0.1 0.2")
    assert exc.value.line == 2


def test_parse_vec_non_numeric():
    with pytest.raises(NonNumericComponent) as exc:
        parse_vector_table("1 2\nfoo 0.1 abc\n")
    assert exc.value.line == 2


@pytest.mark.parametrize("header", ["", "3\n", "a b\n", "2 0\n"])
def test_parse_vec_bad_header(header):
    with pytest.raises(BadHeader):
        parse_vector_table(header + "foo 1 2\n")


def test_parse_vec_count_mismatch_warns():
    with pytest.warns(UserWarning, match="declares 1 words but 2"):
        table = parse_vector_table("1 2\nfoo 1 2\nbar 3 4\n")
    assert len(table) == 2


def test_lookup_static():
    table = parse_vector_table(VEC_FIXTURE)
    np.testing.assert_array_equal(lookup_static(table, "foo"), [0.1, 0.2, 0.3])
    np.testing.assert_allclose(lookup_static(table, "foo bar"), [0.55, 0.1, 0.15], rtol=0, atol=1e-15)
    np.testing.assert_allclose(lookup_static(table, "foo qux"), [0.1, 0.2, 0.3])
    with pytest.raises(AllTokensOutOfVocabulary):
        lookup_static(table, "qux")


# ---------------------------------------------------------------- cache

def test_cache_roundtrip_bitwise(tmp_path):
    path = tmp_path / "c.jsonl"
    cache = EmbeddingCache(path)
    vec = np.random.default_rng(0).normal(size=7) * 1e-3
    cache.put("b", "hello", vec)
    reopened = EmbeddingCache(path)
    got = reopened.get("b", "hello")
    assert got.tobytes() == vec.tobytes()
    rec = json.loads(path.read_text().splitlines()[0])
    assert set(rec) == {"key", "backend_id", "text_hash", "dim", "vector"}
    assert rec["dim"] == 7
    assert reopened.get("other", "hello") is None


def test_cache_skips_torn_line(tmp_path):
    path = tmp_path / "c.jsonl"
    cache = EmbeddingCache(path)
    cache.put("b", "x", [1.0, 2.0])
    with open(path, "a") as fh:
        fh.write('{"key": "abc", "vec')
    assert len(EmbeddingCache(path)) == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=6))
def test_cache_put_get_identity(values):
    cache = EmbeddingCache()
    cache.put("b", "t", values)
    assert cache.get("b", "t").tobytes() == np.asarray(values, dtype=float).tobytes()


def test_cache_concurrent_writers_single_lock(tmp_path):
    cache = EmbeddingCache(tmp_path / "c.jsonl")

    def work(k):
        for i in range(50):
            cache.put("b", f"{k}-{i}", [float(i), float(k)])

    threads = [threading.Thread(target=work, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(EmbeddingCache(tmp_path / "c.jsonl")) == 200


# ---------------------------------------------------------------- embed_texts

def test_second_call_hits_cache():
    backend = HashBackend()
    cache = EmbeddingCache()
    texts = ["a", "b", "a b"]
    first = embed_texts(backend, texts, cache)
    calls = len(backend.calls)
    hits_before = cache.hits
    second = embed_texts(backend, texts, cache)
    assert len(backend.calls) == calls
    assert cache.hits - hits_before == len(texts)
    for x, y in zip(first, second):
        assert x.tobytes() == y.tobytes()


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        embed_texts(HashBackend(dimension=3, wrong_dim=5), ["x"], EmbeddingCache())


def test_batching_preserves_order():
    backend = HashBackend(batch_size=100)
    texts = [f"text {i}" for i in range(1000)]
    out = embed_texts(backend, texts, EmbeddingCache())
    assert len(backend.calls) == 10
    assert all(len(c) == 100 for c in backend.calls)
    ref = HashBackend()
    for i in (0, 1, 517, 999):
        np.testing.assert_array_equal(out[i], ref.fetch([texts[i]])[0])


def test_duplicate_texts_fetched_once():
    backend = HashBackend()
    out = embed_texts(backend, ["a", "a", "b"], EmbeddingCache())
    assert sum(len(c) for c in backend.calls) == 2
    np.testing.assert_array_equal(out[0], out[1])


# ---------------------------------------------------------------- HTTP backend

def _openai_like(request):
    body = json.loads(request.content)
    data = [{"embedding": [float(len(t)), 1.0, 0.0]} for t in body["input"]]
    return httpx.Response(200, json={"data": data})


def test_http_backend_contract(monkeypatch):
    monkeypatch.setenv("TEST_KEY", "sekret")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return _openai_like(request)

    backend = HttpBackend("remote", 3, "https://example.invalid/embed", auth_env_var="TEST_KEY",
                          extra_body={"model": "m"}, transport=httpx.MockTransport(handler))
    out = embed_texts(backend, ["ab", "abcd"], EmbeddingCache())
    assert seen["auth"] == "Bearer sekret"
    assert seen["body"] == {"model": "m", "input": ["ab", "abcd"]}
    np.testing.assert_array_equal(out[1], [4.0, 1.0, 0.0])


def test_http_backend_custom_response_path():
    def handler(request):
        texts = json.loads(request.content)["texts"]
        return httpx.Response(200, json={"result": {"vectors": [[1.0, 2.0] for _ in texts]}})

    backend = HttpBackend("r", 2, "https://x.invalid", input_field="texts",
                          response_path=["result", "vectors"], transport=httpx.MockTransport(handler))
    assert len(embed_texts(backend, ["a", "b"], EmbeddingCache())) == 2


def test_http_backend_auth_missing(monkeypatch):
    monkeypatch.delenv("NOPE_KEY", raising=False)
    backend = HttpBackend("r", 3, "https://x.invalid", auth_env_var="NOPE_KEY",
                          transport=httpx.MockTransport(_openai_like))
    with pytest.raises(AuthMissing):
        embed_texts(backend, ["a"], EmbeddingCache())


def test_http_backend_retries_with_exponential_backoff():
    attempts = []
    sleeps = []

    def handler(request):
        attempts.append(1)
        if len(attempts) < 3:
            return httpx.Response(429)
        return _openai_like(request)

    backend = HttpBackend("r", 3, "https://x.invalid", transport=httpx.MockTransport(handler),
                          sleep=sleeps.append)
    embed_texts(backend, ["a"], EmbeddingCache())
    assert len(attempts) == 3
    assert sleeps == [1.0, 2.0]


def test_http_backend_gives_up_after_five_attempts():
    sleeps = []
    backend = HttpBackend("r", 3, "https://x.invalid",
                          transport=httpx.MockTransport(lambda r: httpx.Response(503)), sleep=sleeps.append)
    with pytest.raises(BackendUnavailable, match="5 attempts"):
        embed_texts(backend, ["a"], EmbeddingCache())
    assert sleeps == [1.0, 2.0, 4.0, 8.0]


def test_http_backend_client_error_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400, text="bad")

    backend = HttpBackend("r", 3, "https://x.invalid", transport=httpx.MockTransport(handler), sleep=lambda s: None)
    with pytest.raises(BackendUnavailable, match="400"):
        embed_texts(backend, ["a"], EmbeddingCache())
    assert len(calls) == 1


def test_resolve_backend(tmp_path):
    vec = tmp_path / "v.vec"
    vec.write_text(VEC_FIXTURE)
    b = resolve_backend(f"static:{vec}")
    assert isinstance(b, StaticBackend) and b.dimension == 3
    cfg = {"backends": [{"backend_id": "oa", "kind": "remote_api", "dimension": 8,
                         "url": "https://x.invalid", "auth_env_var": "K", "batch_size": 16},
                        {"backend_id": "ft", "kind": "static_table", "path": "v.vec"}]}
    oa = resolve_backend("oa", cfg)
    assert isinstance(oa, HttpBackend) and oa.batch_size == 16 and oa.dimension == 8
    assert resolve_backend("ft", cfg, base_dir=tmp_path).dimension == 3
    with pytest.raises(UnknownBackend):
        resolve_backend("nope", cfg)


# ---------------------------------------------------------------- embed_stream

def test_embed_stream_cumulative_remote():
    traj = embed_stream(stream("cat", "dog"), HashBackend(), "cumulative", EmbeddingCache())
    assert traj.vectors.shape == (2, 3)
    assert not np.array_equal(traj.vectors[0], traj.vectors[1])
    assert traj.items == ("cat", "dog")


def test_embed_stream_static_equals_lookup_map():
    table = parse_vector_table(VEC_FIXTURE)
    s = stream("foo", "bar", "foo bar")
    traj = embed_stream(s, StaticBackend("ft", table), "non_cumulative")
    expected = np.vstack([lookup_static(table, it) for it in s.items])
    np.testing.assert_array_equal(traj.vectors, expected)
    assert not traj.missing.any()


def test_embed_stream_oov_gap_is_masked():
    table = parse_vector_table("3 2\nfoo 1 0\nbar 0 1\nbaz 1 1\n")
    traj = embed_stream(stream("foo", "qux", "bar"), StaticBackend("ft", table), "non_cumulative")
    assert traj.missing.tolist() == [False, True, False]
    series, mean = distance_to_next(traj)
    assert series.valid.tolist() == [False, False]
    assert mean is None
    m = summarize(traj)
    assert m.dist_centroid.valid.tolist() == [True, False, True]
    assert m.velocity_mean is None and m.accel_mean is None


def test_trajectory_store_roundtrip(tmp_path):
    table = parse_vector_table("2 2\nfoo 0.1 0.7\nbar 0.3 0.9\n")
    trajs = [embed_stream(stream("foo", "qux", "bar"), StaticBackend("ft", table), "cumulative")]
    write_trajectories(trajs, tmp_path / "t.jsonl")
    (back,) = read_trajectories(tmp_path / "t.jsonl")
    assert back.missing.tolist() == trajs[0].missing.tolist()
    np.testing.assert_array_equal(back.vectors[~back.missing], trajs[0].vectors[~trajs[0].missing])
    assert back.prefix_mode is PrefixMode.CUMULATIVE
