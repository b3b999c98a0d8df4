"""Command-line surface: index, search, fuse, tune, eval, profile, analyze.

Exit codes: 0 success, 1 usage error, 2 data error (unparseable or invalid
inputs), 3 internal error. Failures print a single machine-parsable line to
stderr: ``error: <category>: <message>``.

A plain-text config file (INI-style ``key=value`` sections) can pre-set any
option; command-line flags always override it. Example::

    [bm25]
    k1 = 0.9
    b = 0.4

    [fusion]
    method = nsf
    norm = zscore
    weights = 0.2,0.8
    rrf_k = 60
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, fusion, io, lexical, metrics, profiling, vectors
from .model import ParseError, ValidationError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_KINDS = ("lexical", "dense", "sparse", "multivector")


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"error: usage: {message}\n")


class _Config:
    """INI config with flag-beats-config resolution."""

    def __init__(self, path: str | None):
        self._parser = configparser.ConfigParser()
        if path is not None:
            if not Path(path).exists():
                raise ValidationError(f"config file not found: {path}")
            self._parser.read(path, encoding="utf-8")

    def get(self, section: str, key: str, fallback=None):
        return self._parser.get(section, key, fallback=fallback)

    def resolve(self, flag_value, section: str, key: str, fallback=None, cast=None):
        if flag_value is not None:
            return flag_value
        raw = self.get(section, key)
        if raw is None:
            return fallback
        return cast(raw) if cast is not None else raw


def _require_paths(*paths) -> None:
    for path in paths:
        if path is not None and not Path(path).exists():
            raise ValidationError(f"path does not exist: {path}")


def _parse_cutoffs(text: str) -> tuple[int, ...]:
    try:
        cutoffs = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValidationError(f"cutoffs must be integers, got {text!r}") from None
    if not cutoffs:
        raise ValidationError("at least one cutoff is required")
    if any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise ValidationError(f"cutoffs must be strictly increasing, got {cutoffs}")
    return cutoffs


# --- index ------------------------------------------------------------------


def _cmd_index(args, config: _Config) -> int:
    _require_paths(args.corpus, args.embeddings)
    if args.kind == "lexical":
        if args.corpus is None:
            raise ValidationError("--corpus is required for a lexical index")
        corpus = io.read_corpus(args.corpus)
        index = lexical.build_lexical_index(corpus)
        lexical.save_lexical_index(index, args.out)
    else:
        if args.embeddings is None:
            raise ValidationError(f"--embeddings is required for a {args.kind} index")
        cosine = args.cosine
        if args.kind == "dense":
            index = vectors.ingest_dense(args.embeddings, normalize=cosine)
            vectors.dump_dense_binary(index, args.out)
        elif args.kind == "sparse":
            index = vectors.ingest_sparse(args.embeddings)
            _write_sparse_index(index, args.out)
        else:
            store = vectors.ingest_multivector(args.embeddings, normalize=cosine)
            _write_multivector_store(store, args.out)
    print(f"indexed -> {args.out}")
    return EXIT_OK


def _write_sparse_index(index: vectors.SparseIndex, path) -> None:
    by_doc: dict[str, dict[str, float]] = {doc_id: {} for doc_id in index.ids}
    for term, plist in index.postings.items():
        for doc_id, weight in plist:
            by_doc[doc_id][term] = weight
    with open(path, "w", encoding="utf-8") as handle:
        for doc_id in index.ids:
            weights = {t: by_doc[doc_id][t] for t in sorted(by_doc[doc_id])}
            handle.write(json.dumps({"id": doc_id, "weights": weights}) + "\n")


def _write_multivector_store(store: vectors.MultiVectorStore, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc_id, matrix in zip(store.ids, store.matrices):
            tokens = [[float(v) for v in row] for row in matrix]
            handle.write(json.dumps({"id": doc_id, "tokens": tokens}) + "\n")


# --- search -----------------------------------------------------------------


def _cmd_search(args, config: _Config) -> int:
    _require_paths(args.index, args.queries)
    k = args.k
    tag = args.tag or args.kind
    runs = []
    if args.kind == "lexical":
        index = lexical.load_lexical_index(args.index)
        params = lexical.Bm25Params(
            k1=config.resolve(args.k1, "bm25", "k1", fallback=0.9, cast=float),
            b=config.resolve(args.b, "bm25", "b", fallback=0.4, cast=float),
        )
        for query in io.read_queries(args.queries):
            runs.append(lexical.bm25_search(index, params, query, k, system_id=tag))
    elif args.kind == "dense":
        index = vectors.load_dense_binary(args.index)
        for query_id, vector in _iter_query_vectors(args.queries, "vector"):
            query = np.asarray(vector, dtype=float)
            if args.cosine:
                norm = float(np.linalg.norm(query))
                if norm == 0:
                    raise ValidationError(f"query {query_id!r}: zero vector")
                query = query / norm
            runs.append(
                vectors.dense_search(index, query, k, query_id=query_id, system_id=tag)
            )
    elif args.kind == "sparse":
        index = vectors.ingest_sparse(args.index)
        for query_id, weights in _iter_query_vectors(args.queries, "weights"):
            runs.append(
                vectors.sparse_search(index, weights, k, query_id=query_id, system_id=tag)
            )
    else:
        store = vectors.ingest_multivector(args.index)
        for query_id, tokens in _iter_query_vectors(args.queries, "tokens"):
            query = np.asarray(tokens, dtype=float)
            if args.cosine:
                norms = np.linalg.norm(query, axis=1, keepdims=True)
                if (norms == 0).any():
                    raise ValidationError(f"query {query_id!r}: zero token vector")
                query = query / norms
            runs.append(
                vectors.multivector_search(store, query, k, query_id=query_id, system_id=tag)
            )
    io.write_run(runs, args.out, tag=tag)
    print(f"searched {len(runs)} queries -> {args.out}")
    return EXIT_OK


def _iter_query_vectors(path, field: str):
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if "id" not in record or field not in record:
                raise ParseError(f"{path}:{lineno}: missing 'id' or {field!r} field")
            yield str(record["id"]), record[field]


# --- fuse -------------------------------------------------------------------


def _load_run_files(paths) -> list[list[io.RunList]]:
    _require_paths(*paths)
    return [io.read_run(path) for path in paths]


def _truncate_runs(runs_by_system, depth: int):
    if depth <= 0:
        return runs_by_system
    return [[run.top(depth) for run in runs] for runs in runs_by_system]


def _cmd_fuse(args, config: _Config) -> int:
    runs_by_system = _load_run_files(args.runs)
    runs_by_system = _truncate_runs(runs_by_system, args.pool_depth)
    spec = fusion.FusionSpec.from_mapping(
        {
            "method": config.resolve(args.method, "fusion", "method", fallback="nsf"),
            "norm": config.resolve(args.norm, "fusion", "norm", fallback="zscore"),
            "weights": config.resolve(args.weights, "fusion", "weights"),
            "rrf_k": config.resolve(args.rrf_k, "fusion", "rrf_k", fallback=60.0, cast=float),
        }
    )
    dists = None
    if spec.method == "nsf" and spec.normalization == "percentile":
        if args.dist:
            if len(args.dist) != len(args.runs):
                raise ValidationError(
                    f"{len(args.dist)} --dist files for {len(args.runs)} run files"
                )
            _require_paths(*args.dist)
            dists = [fusion.ScoreDistribution.load(path) for path in args.dist]
        else:
            dists = [
                fusion.build_score_distribution(f"system{i}", runs)
                for i, runs in enumerate(runs_by_system)
            ]
    fused = fusion.fuse_many(runs_by_system, spec, dists=dists, tag=args.tag)
    if args.k:
        fused = [run.top(args.k) for run in fused]
    io.write_run(fused, args.out)
    print(f"fused {len(args.runs)} systems over {len(fused)} queries -> {args.out}")
    return EXIT_OK


# --- tune -------------------------------------------------------------------


def _cmd_tune(args, config: _Config) -> int:
    runs_by_system = _load_run_files(args.runs)
    _require_paths(args.qrels)
    qrels = io.read_qrels(args.qrels)
    norm = config.resolve(args.norm, "fusion", "norm", fallback="zscore")
    dists = None
    if fusion.canonical_normalization(norm) == "percentile":
        dists = [
            fusion.build_score_distribution(f"system{i}", runs)
            for i, runs in enumerate(runs_by_system)
        ]
    weights = fusion.tune_weights(
        runs_by_system,
        qrels,
        normalization=norm,
        metric=args.metric,
        step=args.step,
        dists=dists,
    )
    grouped = fusion.group_runs_by_query(runs_by_system)
    metric_name, metric_fn = metrics.resolve_metric(args.metric)
    evaluable = [qid for qid in grouped if qrels.relevant(qid)]
    fused = {
        qid: fusion.fuse_nsf(grouped[qid], weights, norm, dists=dists) for qid in evaluable
    }
    achieved = sum(metric_fn(fused[qid], qrels) for qid in evaluable) / len(evaluable)
    report = {
        "weights": list(weights),
        "systems": [str(path) for path in args.runs],
        "normalization": fusion.canonical_normalization(norm),
        "metric": metric_name,
        "value": achieved,
        "step": args.step,
        "queries": len(evaluable),
    }
    print(json.dumps(report, indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


# --- eval -------------------------------------------------------------------


def _cmd_eval(args, config: _Config) -> int:
    _require_paths(args.run, args.qrels)
    runs = io.read_run(args.run)
    qrels = io.read_qrels(args.qrels)
    cutoffs = _parse_cutoffs(
        config.resolve(args.cutoffs, "eval", "cutoffs", fallback="10")
    )
    report = metrics.evaluate_run(runs, qrels, cutoffs)
    print(report.format_table())
    if args.json_out:
        report.save_json(args.json_out)
    return EXIT_OK


# --- profile ----------------------------------------------------------------


def _cmd_profile(args, config: _Config) -> int:
    inputs = profiling.CostModelInputs(
        avg_query_len=args.query_len,
        avg_doc_len=args.doc_len,
        corpus_size=args.corpus_size,
        dim=args.dim,
        bits_per_value=args.bits,
        forward_pass_flops=args.forward_flops,
        avg_query_nonzeros=args.query_nonzeros,
        avg_posting_len=args.posting_len,
        rerank_depth=args.rerank_depth,
        cross_encoder_flops=args.cross_encoder_flops,
    )
    flops = profiling.flops_report(inputs)
    size_bytes = profiling.estimate_flat_index_size(
        inputs.dim, inputs.bits_per_value, inputs.corpus_size
    )
    sizes = [
        profiling.IndexSizeReport(
            f"flat:{inputs.dim}d@{inputs.bits_per_value}b",
            size_bytes,
            plaintext_bytes=args.plaintext_bytes,
        )
    ]
    rows = [
        ("bm25", flops.bm25),
        ("dense", flops.dense),
        ("sparse", flops.sparse),
        ("multivector", flops.multivector),
        ("multivector (query-scaled variant)", flops.multivector_query_scaled),
        ("cross-encoder", flops.cross_encoder),
    ]
    name_width = max(len(name) for name, _ in rows)
    print("FLOPs per query")
    for name, value in rows:
        print(f"  {name.ljust(name_width)}  {value:.3e}")
    print("Index storage")
    for report in sizes:
        ratio = report.ratio_to_plaintext
        ratio_text = f"  x{ratio:.1f} of plain text" if ratio is not None else ""
        print(f"  {report.label}  {report.mib:.1f}MiB{ratio_text}")

    latency = None
    if args.measure:
        latency = _measure_live_latency(args)
        print("Latency (s/query)")
        print(
            f"  mean {latency.mean_seconds:.6f}  min {latency.min_seconds:.6f}  "
            f"max {latency.max_seconds:.6f}  over {latency.count} queries"
        )
    if args.json_out:
        profiling.save_profile_json(args.json_out, flops, sizes, latency)
    return EXIT_OK


def _measure_live_latency(args) -> profiling.LatencyReport:
    _require_paths(args.index, args.queries)
    kind = args.measure
    k = args.k
    if kind == "lexical":
        index = lexical.load_lexical_index(args.index)
        params = lexical.Bm25Params()
        queries = io.read_queries(args.queries)
        return profiling.measure_latency(
            lambda q: lexical.bm25_search(index, params, q, k), queries, warmup=args.warmup
        )
    if kind == "dense":
        index = vectors.load_dense_binary(args.index)
        queries = [
            np.asarray(vec, dtype=float)
            for _, vec in _iter_query_vectors(args.queries, "vector")
        ]
        return profiling.measure_latency(
            lambda q: vectors.dense_search(index, q, k), queries, warmup=args.warmup
        )
    if kind == "sparse":
        index = vectors.ingest_sparse(args.index)
        queries = [dict(w) for _, w in _iter_query_vectors(args.queries, "weights")]
        return profiling.measure_latency(
            lambda q: vectors.sparse_search(index, q, k), queries, warmup=args.warmup
        )
    store = vectors.ingest_multivector(args.index)
    queries = [tokens for _, tokens in _iter_query_vectors(args.queries, "tokens")]
    return profiling.measure_latency(
        lambda q: vectors.multivector_search(store, q, k), queries, warmup=args.warmup
    )


# --- analyze ----------------------------------------------------------------


def _cmd_analyze(args, config: _Config) -> int:
    if len(args.runs) != 2:
        raise ValidationError("analyze compares exactly two systems (two run files)")
    runs_by_system = _load_run_files(args.runs)
    _require_paths(args.qrels)
    qrels = io.read_qrels(args.qrels)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    system_ids = [
        runs[0].system_id if runs else f"system{i}"
        for i, runs in enumerate(runs_by_system)
    ]

    pairs = analysis.sample_pairs(runs_by_system, qrels, args.n_pos, args.n_neg, args.seed)

    dists = []
    for i, runs in enumerate(runs_by_system):
        normalized_scores: list[float] = []
        for run in runs:
            raw = [score for _, score in run.entries]
            normalized_scores.extend(fusion.normalize(raw, "minmax"))
        dists.append(fusion.ScoreDistribution(system_ids[i], normalized_scores))

    report = analysis.complementarity_report(pairs, dists[0], dists[1])
    written = []
    for i, dist in enumerate(dists):
        path = out_dir / f"hist_{i}_{system_ids[i]}.csv"
        analysis.write_histogram_csv(dist, args.bins, path)
        written.append(path)
    pairs_path = out_dir / "pairs.csv"
    analysis.write_pairs_csv(pairs, system_ids, pairs_path)
    written.append(pairs_path)
    regions_path = out_dir / "regions.csv"
    analysis.write_regions_csv(report, regions_path)
    written.append(regions_path)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# --- parser wiring ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latefuse", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI config file; flags override its values")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p_index = subparsers.add_parser("index", help="build an index from a corpus or embeddings")
    p_index.add_argument("--kind", choices=_KINDS, required=True)
    p_index.add_argument("--corpus", help="JSONL corpus (lexical kind)")
    p_index.add_argument("--embeddings", help="JSONL embeddings (vector kinds)")
    p_index.add_argument("--out", required=True, help="output index path")
    p_index.add_argument(
        "--cosine",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="L2-normalize vectors at ingestion so dot products are cosines",
    )
    p_index.set_defaults(func=_cmd_index)

    p_search = subparsers.add_parser("search", help="rank queries against an index")
    p_search.add_argument("--kind", choices=_KINDS, required=True)
    p_search.add_argument("--index", required=True)
    p_search.add_argument("--queries", required=True, help="JSONL query file")
    p_search.add_argument("--k", type=int, default=1000)
    p_search.add_argument("--k1", type=float, default=None, help="BM25 k1 (default 0.9)")
    p_search.add_argument("--b", type=float, default=None, help="BM25 b (default 0.4)")
    p_search.add_argument(
        "--cosine",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="L2-normalize query vectors before scoring",
    )
    p_search.add_argument("--tag", help="system tag for the run file (default: kind)")
    p_search.add_argument("--out", required=True, help="output TREC run file")
    p_search.set_defaults(func=_cmd_search)

    p_fuse = subparsers.add_parser("fuse", help="fuse two or more run files")
    p_fuse.add_argument("runs", nargs="+", help="TREC run files, one per system")
    p_fuse.add_argument("--method", choices=("bcf", "rrf", "nsf"), default=None)
    p_fuse.add_argument("--norm", choices=("minmax", "min-max", "zscore", "z-score", "percentile"), default=None)
    p_fuse.add_argument("--weights", help="comma-separated, one per system (default: equal)")
    p_fuse.add_argument("--rrf-k", dest="rrf_k", type=float, default=None)
    p_fuse.add_argument(
        "--dist",
        action="append",
        help="score-distribution JSON per system (percentile norm); "
        "built from the run files when omitted",
    )
    p_fuse.add_argument(
        "--pool-depth",
        type=int,
        default=0,
        help="truncate each system's list to this depth before fusing (0 = full)",
    )
    p_fuse.add_argument("--k", type=int, default=0, help="truncate fused output (0 = full)")
    p_fuse.add_argument("--tag", help="system tag for the fused run")
    p_fuse.add_argument("--out", required=True)
    p_fuse.set_defaults(func=_cmd_fuse)

    p_tune = subparsers.add_parser("tune", help="grid-search score-fusion weights")
    p_tune.add_argument("runs", nargs="+", help="TREC run files, one per system (2-4)")
    p_tune.add_argument("--qrels", required=True)
    p_tune.add_argument("--norm", default=None)
    p_tune.add_argument("--metric", default="recall@10", help="recall@K, mrr@K, or rp")
    p_tune.add_argument("--step", type=float, default=0.05)
    p_tune.add_argument("--out", help="write the JSON report here as well")
    p_tune.set_defaults(func=_cmd_tune)

    p_eval = subparsers.add_parser("eval", help="score a run file against qrels")
    p_eval.add_argument("--run", required=True)
    p_eval.add_argument("--qrels", required=True)
    p_eval.add_argument("--cutoffs", default=None, help="comma-separated, e.g. 10,100,500")
    p_eval.add_argument("--json-out", dest="json_out")
    p_eval.set_defaults(func=_cmd_eval)

    p_profile = subparsers.add_parser(
        "profile", help="cost-model estimates and optional live latency"
    )
    p_profile.add_argument("--query-len", dest="query_len", type=float, default=15.0)
    p_profile.add_argument("--doc-len", dest="doc_len", type=float, default=157.0)
    p_profile.add_argument("--corpus-size", dest="corpus_size", type=int, default=27_942)
    p_profile.add_argument("--dim", type=int, default=768)
    p_profile.add_argument("--bits", type=int, default=32)
    p_profile.add_argument(
        "--forward-flops",
        dest="forward_flops",
        type=float,
        default=profiling.BASE_ENCODER_FORWARD_FLOPS,
        help="encoder forward-pass FLOPs (externally measured)",
    )
    p_profile.add_argument("--query-nonzeros", dest="query_nonzeros", type=float, default=178.0)
    p_profile.add_argument("--posting-len", dest="posting_len", type=float, default=378.0)
    p_profile.add_argument("--rerank-depth", dest="rerank_depth", type=int, default=1000)
    p_profile.add_argument(
        "--cross-encoder-flops",
        dest="cross_encoder_flops",
        type=float,
        default=profiling.CROSS_ENCODER_PAIR_FLOPS,
        help="forward-pass FLOPs for one query-document pair",
    )
    p_profile.add_argument("--plaintext-bytes", dest="plaintext_bytes", type=float, default=None)
    p_profile.add_argument(
        "--measure",
        choices=_KINDS,
        help="also measure live latency against --index/--queries",
    )
    p_profile.add_argument("--index")
    p_profile.add_argument("--queries")
    p_profile.add_argument("--k", type=int, default=10)
    p_profile.add_argument("--warmup", type=int, default=3)
    p_profile.add_argument("--json-out", dest="json_out")
    p_profile.set_defaults(func=_cmd_profile)

    p_analyze = subparsers.add_parser(
        "analyze", help="complementarity quadrants, pair sample, histograms (CSV bundle)"
    )
    p_analyze.add_argument("runs", nargs="+", help="exactly two TREC run files")
    p_analyze.add_argument("--qrels", required=True)
    p_analyze.add_argument("--seed", type=int, default=0)
    p_analyze.add_argument("--bins", type=int, default=20)
    p_analyze.add_argument("--n-pos", dest="n_pos", type=int, default=100)
    p_analyze.add_argument("--n-neg", dest="n_neg", type=int, default=100)
    p_analyze.add_argument("--out-dir", dest="out_dir", required=True)
    p_analyze.set_defaults(func=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _Config(getattr(args, "config", None))
        return args.func(args, config)
    except (ParseError, ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: data: {message}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        message = " ".join(str(exc).split())
        print(f"error: internal: {type(exc).__name__}: {message}", file=sys.stderr)
        return EXIT_INTERNAL


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
