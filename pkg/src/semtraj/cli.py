"""Command-line front end: ingest -> embed -> [whiten] -> metrics -> compare / correlate.

Every command works inside one run directory ``runs/<run_id>/`` whose
``manifest.json`` records inputs, backends, modes and whitening settings.

Exit codes: 0 success, 1 data/validation error, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from . import __version__
from .datamodel import (
    CANONICAL_SCHEMA,
    format_stats_table,
    load_schema,
    read_dataset,
    stats_by_dataset,
    write_streams,
)
from .embed import (
    EmbeddingCache,
    PrefixMode,
    embed_stream,
    load_config,
    read_trajectories,
    resolve_backend,
    write_trajectories,
)
from .embed.backends import StaticBackend
from .errors import ConfigError, DataError, EmptyInput, InsufficientOverlap, SemtrajError
from .metrics import SUMMARY_METRICS, summarize_all
from .runs import (
    STREAMS,
    TRAJ_DIR,
    TRAJ_ZCA_DIR,
    WHITEN_DIR,
    RunManifest,
    read_csv_rows,
    run_id_for,
    sha256_bytes,
    sha256_file,
    slug,
    write_csv,
    write_json,
)
from .stats import METHOD_NOTE, WEIGHT_NOTE, cross_model_matrix, group_summary_table
from .whiten import whiten_trajectories

logger = logging.getLogger("semtraj")

METRIC_COLUMNS = ("dataset", "participant_id", "group", "concept", "backend", "prefix_mode",
                  "n_items") + SUMMARY_METRICS + ("apen",)
STEP_COLUMNS = ("dataset", "participant_id", "group", "concept", "backend", "prefix_mode",
                "metric", "step", "value")
COMPARISON_COLUMNS = ("dataset", "backend", "prefix_mode", "metric", "group_a", "group_b", "n_a", "n_b",
                      "mean_a", "mean_b", "t_statistic", "degrees_of_freedom", "p_raw", "p_adjusted",
                      "cohens_d", "weight", "n_dropped")
SUMMARY_COLUMNS = ("dataset", "backend", "prefix_mode", "n_pairs", "weighted_count", "mean_abs_d", "n_metrics")


def _run_dir(path: str | Path) -> tuple[Path, RunManifest]:
    run = Path(path)
    if not (run / "manifest.json").is_file():
        raise ConfigError(f"{run} is not a run directory (no manifest.json); run 'ingest' first")
    return run, RunManifest.load(run)


# ---------------------------------------------------------------- commands

def cmd_ingest(paths: Sequence[str | Path], schema_path: str | Path | None = None,
               runs_dir: str | Path = "runs", run: str | Path | None = None) -> Path:
    """Validate exports, write canonical streams.csv and descriptive stats."""
    schema = load_schema(schema_path) if schema_path else dict(CANONICAL_SCHEMA)
    for p in paths:
        if not Path(p).is_file():
            raise ConfigError(f"input file not found: {p}")
    streams = []
    for p in paths:
        streams.extend(read_dataset(p, schema))
    keys = [s.key for s in streams]
    if len(set(keys)) != len(keys):
        raise DataError("the same (dataset, participant, concept) stream appears in several input files")
    streams.sort(key=lambda s: s.key)

    run_id = run_id_for(paths, schema)
    run_dir = Path(run) if run else Path(runs_dir) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    write_streams(streams, run_dir / STREAMS)
    stats = stats_by_dataset(streams)
    write_csv([s.to_dict() for s in stats], list(stats[0].to_dict()), run_dir / "stats.csv", run_id)
    write_json({"run_id": run_id, "datasets": [s.to_dict() for s in stats]}, run_dir / "stats.json")

    manifest = RunManifest(
        run_id=run_id,
        inputs=[{"path": str(p), "sha256": sha256_file(p)} for p in paths],
        schema=schema,
        datasets=sorted({s.dataset_id for s in streams}),
    )
    manifest.record_stage("ingest", {"schema": str(schema_path) if schema_path else None},
                          [STREAMS, "stats.csv", "stats.json"])
    manifest.save(run_dir)
    print(format_stats_table(stats))
    print(f"run: {run_dir}")
    return run_dir


def _traj_name(backend_id: str, mode: PrefixMode) -> str:
    return f"{slug(backend_id)}__{mode.value}.jsonl"


def cmd_embed(run: str | Path, backend_id: str, mode: str = "cumulative",
              config_path: str | Path | None = None, cache_path: str | Path | None = None) -> Path:
    """Embed every stream of the run with one backend and prefix mode."""
    run_dir, manifest = _run_dir(run)
    config = load_config(config_path) if config_path else {}
    base_dir = Path(config_path).parent if config_path else None
    backend = resolve_backend(backend_id, config, base_dir=base_dir)
    prefix_mode = PrefixMode.parse(mode)
    if cache_path is None:
        cache_path = config.get("cache_path") or run_dir / "embedding_cache.jsonl"
    cache = EmbeddingCache(cache_path)

    streams = read_dataset(run_dir / STREAMS)
    trajectories = [embed_stream(s, backend, prefix_mode, cache) for s in streams]
    out = run_dir / TRAJ_DIR / _traj_name(backend.backend_id, prefix_mode)
    write_trajectories(trajectories, out)

    n_missing = sum(int(t.missing.sum()) for t in trajectories)
    if isinstance(backend, StaticBackend):
        logger.info("embedded %d streams with static table %s (%d OOV points)",
                    len(trajectories), backend.backend_id, n_missing)
    else:
        logger.info("embedded %d streams with %s: %d remote requests, %d cache hits",
                    len(trajectories), backend.backend_id, backend.request_count, cache.hits)

    if config_path:
        manifest.config_hash = sha256_bytes(Path(config_path).read_bytes())
    manifest.add_unique("backends", backend.backend_id)
    manifest.add_unique("prefix_modes", prefix_mode.value)
    stage = f"embed:{backend.backend_id}:{prefix_mode.value}"
    manifest.record_stage(stage, {"backend": backend.backend_id, "dimension": backend.dimension,
                                  "kind": backend.kind, "mode": prefix_mode.value,
                                  "remote_requests": getattr(backend, "request_count", 0),
                                  "oov_points": n_missing},
                          [str(out.relative_to(run_dir))])
    manifest.save(run_dir)
    return out


def _trajectory_files(run_dir: Path, whitened: bool) -> list[Path]:
    d = run_dir / (TRAJ_ZCA_DIR if whitened else TRAJ_DIR)
    files = sorted(d.glob("*.jsonl")) if d.is_dir() else []
    if not files:
        hint = "run 'whiten' first" if whitened else "run 'embed' first"
        raise ConfigError(f"no trajectories in {d}; {hint}")
    return files


def cmd_whiten(run: str | Path, eps: float = 1e-5) -> dict:
    """ZCA-whiten each (dataset, backend, mode) scope; diagnostics go to the manifest."""
    run_dir, manifest = _run_dir(run)
    diagnostics = {}
    outputs = []
    for path in _trajectory_files(run_dir, whitened=False):
        trajs = read_trajectories(path)
        by_ds = defaultdict(list)
        for t in trajs:
            by_ds[t.dataset_id].append(t)
        whitened = []
        for ds in sorted(by_ds):
            out, transform, diag = whiten_trajectories(by_ds[ds], eps)
            whitened.extend(out)
            name = f"{path.stem}__{slug(ds)}"
            tpath = run_dir / WHITEN_DIR / f"{name}.json"
            tpath.parent.mkdir(parents=True, exist_ok=True)
            transform.save(tpath)
            diagnostics[name] = diag
            outputs.append(str(tpath.relative_to(run_dir)))
            logger.info("whitened %s: max|offdiag|=%.2e max|diag-1|=%.2e%s", name,
                        diag["max_abs_offdiag"], diag["max_abs_diag_minus_one"],
                        " (rank-deficient: n <= dim)" if diag["rank_deficient"] else "")
        whitened.sort(key=lambda t: t.key)
        out_path = run_dir / TRAJ_ZCA_DIR / path.name
        write_trajectories(whitened, out_path)
        outputs.append(str(out_path.relative_to(run_dir)))
    manifest.whitening = {"enabled": True, "eps": eps, "diagnostics": diagnostics}
    manifest.record_stage("whiten", {"eps": eps}, outputs)
    manifest.save(run_dir)
    return diagnostics


def _suffix(whitened: bool) -> str:
    return "_zca" if whitened else ""


def cmd_metrics(run: str | Path, alpha: float = 1.0, whitened: bool = False, entropy_per_step: bool = False,
                apen_m: int | None = None, apen_r: float | None = None, centroid_source: str = "trajectory",
                steps: bool = False) -> Path:
    """Per-trajectory metric rows for every embedded (backend, mode)."""
    run_dir, manifest = _run_dir(run)
    files = _trajectory_files(run_dir, whitened)
    results = []
    for path in files:
        trajs = read_trajectories(path)
        standalone = None
        if centroid_source == "standalone":
            backend_part = path.name.rsplit("__", 1)[0]
            nc = path.parent / f"{backend_part}__{PrefixMode.NON_CUMULATIVE.value}.jsonl"
            if not nc.is_file():
                raise ConfigError(f"standalone centroids need non-cumulative embeddings at {nc}")
            standalone = read_trajectories(nc)
        elif centroid_source != "trajectory":
            raise ConfigError(f"unknown centroid source {centroid_source!r}")
        results.extend(summarize_all(trajs, alpha=alpha, entropy_per_step=entropy_per_step,
                                     apen_m=apen_m, apen_r=apen_r, standalone=standalone))
    if not results:
        raise EmptyInput("no trajectories to summarize")
    results.sort(key=lambda m: (m.backend_id, m.prefix_mode, m.key))

    sfx = _suffix(whitened)
    rows = [m.row() for m in results]
    csv_path = run_dir / f"metrics{sfx}.csv"
    write_csv(rows, METRIC_COLUMNS, csv_path, manifest.run_id)
    write_json({"run_id": manifest.run_id, "alpha": alpha, "whitened": whitened,
                "entropy_per_step": entropy_per_step, "rows": rows}, run_dir / f"metrics{sfx}.json")
    outputs = [csv_path.name, f"metrics{sfx}.json"]
    if steps:
        step_rows = [r for m in results for r in m.step_rows()]
        write_csv(step_rows, STEP_COLUMNS, run_dir / f"steps{sfx}.csv", manifest.run_id)
        outputs.append(f"steps{sfx}.csv")
    manifest.record_stage(f"metrics{sfx}", {"alpha": alpha, "entropy_per_step": entropy_per_step,
                                            "apen_m": apen_m, "apen_r": apen_r,
                                            "centroid_source": centroid_source}, outputs)
    manifest.save(run_dir)
    logger.info("wrote %d metric rows to %s", len(rows), csv_path)
    return csv_path


def _metric_rows(run_dir: Path, whitened: bool) -> list[dict]:
    path = run_dir / f"metrics{_suffix(whitened)}.csv"
    if not path.is_file():
        raise ConfigError(f"{path} not found; run 'metrics' first")
    return read_csv_rows(path, numeric=SUMMARY_METRICS + ("apen",))


def cmd_compare(run: str | Path, metrics: Sequence[str] = SUMMARY_METRICS, whitened: bool = False) -> Path:
    """Pairwise group comparisons and a per-scope summary per (dataset, backend, mode)."""
    run_dir, manifest = _run_dir(run)
    rows = _metric_rows(run_dir, whitened)
    results, summaries = group_summary_table(rows, metrics)
    if not summaries:
        raise DataError("no metric had at least two groups with two usable values each")
    flat = [{**dict(zip(("dataset", "backend", "prefix_mode"), scope)), **r.to_dict()} for scope, r in results]
    sfx = _suffix(whitened)
    write_csv(flat, COMPARISON_COLUMNS, run_dir / f"comparisons{sfx}.csv", manifest.run_id)
    write_csv(summaries, SUMMARY_COLUMNS, run_dir / f"group_summary{sfx}.csv", manifest.run_id)
    meta = {"run_id": manifest.run_id, "method": METHOD_NOTE, "weights": WEIGHT_NOTE}
    write_json({**meta, "comparisons": flat}, run_dir / f"comparisons{sfx}.json")
    write_json({**meta, "summary": summaries}, run_dir / f"group_summary{sfx}.json")
    manifest.record_stage(f"compare{sfx}", {"metrics": list(metrics)},
                          [f"comparisons{sfx}.csv", f"comparisons{sfx}.json", f"group_summary{sfx}.csv", f"group_summary{sfx}.json"])
    manifest.save(run_dir)
    for s in summaries:
        d = "n/a" if s["mean_abs_d"] is None else f"{s['mean_abs_d']:.3f}"
        print(f"{s['dataset']}\t{s['backend']}\t{s['prefix_mode']}\t{s['n_pairs']} ({s['weighted_count']})\t{d}")
    return run_dir / f"group_summary{sfx}.csv"


def cmd_correlate(run: str | Path, backends: Sequence[str] | None = None,
                  metrics: Sequence[str] = SUMMARY_METRICS, whitened: bool = False) -> Path:
    """Cross-(metric, backend) Pearson matrices, one per dataset."""
    run_dir, manifest = _run_dir(run)
    rows = _metric_rows(run_dir, whitened)
    for r in rows:
        r["label"] = f"{r['backend']}:{r['prefix_mode']}"
    labels = sorted({r["label"] for r in rows})
    if backends:
        wanted = []
        for b in backends:
            match = [lab for lab in labels if lab == b or lab.split(":")[0] == b or lab.rsplit(":", 1)[0] == b]
            if not match:
                raise InsufficientOverlap(f"backend {b!r} has no metric rows (available: {labels})")
            wanted.extend(m for m in match if m not in wanted)
    else:
        wanted = labels

    by_ds = defaultdict(list)
    for r in rows:
        by_ds[r["dataset"]].append(r)
    matrices = {}
    long_rows = []
    for ds in sorted(by_ds):
        mat = cross_model_matrix(by_ds[ds], metrics, backend_field="label", backends=wanted)
        matrices[ds] = mat.to_dict()
        for i, (ma, ba) in enumerate(mat.labels):
            for j, (mb, bb) in enumerate(mat.labels):
                long_rows.append({"dataset": ds, "metric_a": ma, "backend_a": ba, "metric_b": mb,
                                  "backend_b": bb, "r": float(mat.values[i, j]), "n": int(mat.n[i, j])})
    sfx = _suffix(whitened)
    write_json({"run_id": manifest.run_id, "matrices": matrices}, run_dir / f"correlations{sfx}.json")
    write_csv(long_rows, ("dataset", "metric_a", "backend_a", "metric_b", "backend_b", "r", "n"),
              run_dir / f"correlations{sfx}.csv", manifest.run_id)
    manifest.record_stage(f"correlate{sfx}", {"backends": wanted, "metrics": list(metrics)},
                          [f"correlations{sfx}.json", f"correlations{sfx}.csv"])
    manifest.save(run_dir)
    return run_dir / f"correlations{sfx}.json"


# ---------------------------------------------------------------- argparse

def _csv_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semtraj", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and validate dataset CSV exports")
    p.add_argument("paths", nargs="+", help="CSV files")
    p.add_argument("--schema", help="JSON map of logical fields to column names")
    p.add_argument("--runs-dir", default="runs", help="parent directory for run directories")
    p.add_argument("--run", help="explicit run directory (default: <runs-dir>/<run_id>)")

    p = sub.add_parser("embed", help="embed streams into trajectories")
    p.add_argument("--run", required=True)
    p.add_argument("--backend", required=True, help="configured backend id or static:<path.vec>")
    p.add_argument("--mode", default="cumulative", help="cumulative | non-cumulative")
    p.add_argument("--config", help="backend config JSON")
    p.add_argument("--cache", help="embedding cache path (JSON lines)")

    p = sub.add_parser("whiten", help="ZCA-whiten trajectories per dataset/backend/mode")
    p.add_argument("--run", required=True)
    p.add_argument("--eps", type=float, default=1e-5, help="eigenvalue regularizer")

    p = sub.add_parser("metrics", help="compute per-trajectory metrics")
    p.add_argument("--run", required=True)
    p.add_argument("--alpha", type=float, default=1.0, help="time scale (1 / step duration)")
    p.add_argument("--whitened", action="store_true", help="use whitened trajectories")
    p.add_argument("--entropy-per-step", action="store_true", help="divide entropy by the number of valid steps")
    p.add_argument("--apen-m", type=int, help="also compute approximate entropy with this window length")
    p.add_argument("--apen-r", type=float, help="approximate entropy tolerance (default 0.2*SD)")
    p.add_argument("--centroid-source", choices=("trajectory", "standalone"), default="trajectory")
    p.add_argument("--steps", action="store_true", help="also write long-format per-step values")

    p = sub.add_parser("compare", help="pairwise group comparisons")
    p.add_argument("--run", required=True)
    p.add_argument("--metrics", type=_csv_list, default=list(SUMMARY_METRICS))
    p.add_argument("--whitened", action="store_true")

    p = sub.add_parser("correlate", help="cross-model correlation matrices")
    p.add_argument("--run", required=True)
    p.add_argument("--backends", type=_csv_list, help="comma-separated backend ids or backend:mode labels")
    p.add_argument("--metrics", type=_csv_list, default=list(SUMMARY_METRICS))
    p.add_argument("--whitened", action="store_true")
    return parser


def _dispatch(args) -> None:
    if args.command == "ingest":
        cmd_ingest(args.paths, args.schema, args.runs_dir, args.run)
    elif args.command == "embed":
        cmd_embed(args.run, args.backend, args.mode, args.config, args.cache)
    elif args.command == "whiten":
        if args.eps < 0:
            raise ConfigError("--eps must be non-negative")
        cmd_whiten(args.run, args.eps)
    elif args.command == "metrics":
        cmd_metrics(args.run, args.alpha, args.whitened, args.entropy_per_step, args.apen_m,
                    args.apen_r, args.centroid_source, args.steps)
    elif args.command == "compare":
        cmd_compare(args.run, args.metrics, args.whitened)
    elif args.command == "correlate":
        cmd_correlate(args.run, args.backends, args.metrics, args.whitened)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SemtrajError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
