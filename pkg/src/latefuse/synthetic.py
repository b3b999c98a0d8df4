"""Deterministic synthetic benchmark with planted lexical/semantic signals.

Each query has exactly two relevant documents: a *lexical twin* containing
the query's unique keyword (findable by term matching, embedded randomly)
and a *semantic twin* sharing no query terms but embedded next to the query
vector (findable only through the dense index). Every other document is
filler on both axes. A term-matching system and a vector system therefore
each retrieve half the relevant set, and score fusion should retrieve both.

Everything is generated from one seed; regenerating with the same arguments
is byte-identical, which makes the benchmark suitable for reproducibility
checks. Run ``python -m latefuse.synthetic OUT_DIR`` to materialize the
files (corpus.jsonl, queries.jsonl, qrels.txt, dense_docs.jsonl,
dense_queries.jsonl).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import Corpus, Document, Qrels, Query

_FILLER_VOCAB = tuple(f"w{i:02d}" for i in range(40))


@dataclass
class SyntheticBenchmark:
    corpus: Corpus
    queries: list[Query]
    qrels: Qrels
    doc_vectors: dict[str, list[float]]
    query_vectors: dict[str, list[float]]


def _unit(vector: np.ndarray) -> np.ndarray:
    return vector / np.linalg.norm(vector)


def make_benchmark(
    n_docs: int = 200,
    n_queries: int = 20,
    dim: int = 32,
    seed: int = 7,
) -> SyntheticBenchmark:
    if n_docs < 2 * n_queries + 1:
        raise ValueError("need at least two planted docs per query plus one distractor")
    rng = np.random.default_rng(seed)

    def filler(count: int) -> str:
        return " ".join(rng.choice(_FILLER_VOCAB, size=count))

    documents: list[Document] = []
    doc_vectors: dict[str, list[float]] = {}
    query_vectors: dict[str, list[float]] = {}
    queries: list[Query] = []
    judgments: dict[str, set[str]] = {}

    for i in range(n_queries):
        query_id = f"q{i:02d}"
        keyword = f"zkey{i}"
        query_vec = _unit(rng.normal(size=dim))
        queries.append(Query(query_id, f"{keyword} {keyword} {filler(2)}"))
        query_vectors[query_id] = [float(v) for v in query_vec]

        lexical_id = f"d{2 * i:03d}"
        documents.append(
            Document(lexical_id, f"{keyword} {filler(6)} {keyword} {filler(6)} {keyword}")
        )
        doc_vectors[lexical_id] = [float(v) for v in _unit(rng.normal(size=dim))]

        semantic_id = f"d{2 * i + 1:03d}"
        documents.append(Document(semantic_id, filler(15)))
        semantic_vec = _unit(query_vec + 0.02 * rng.normal(size=dim))
        doc_vectors[semantic_id] = [float(v) for v in semantic_vec]

        judgments[query_id] = {lexical_id, semantic_id}

    for j in range(2 * n_queries, n_docs):
        doc_id = f"d{j:03d}"
        documents.append(Document(doc_id, filler(15)))
        doc_vectors[doc_id] = [float(v) for v in _unit(rng.normal(size=dim))]

    return SyntheticBenchmark(
        Corpus(documents), queries, Qrels(judgments), doc_vectors, query_vectors
    )


def write_benchmark(
    out_dir: str | Path,
    n_docs: int = 200,
    n_queries: int = 20,
    dim: int = 32,
    seed: int = 7,
) -> dict[str, Path]:
    """Materialize the benchmark files under ``out_dir``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bench = make_benchmark(n_docs=n_docs, n_queries=n_queries, dim=dim, seed=seed)
    paths = {
        "corpus": out / "corpus.jsonl",
        "queries": out / "queries.jsonl",
        "qrels": out / "qrels.txt",
        "dense_docs": out / "dense_docs.jsonl",
        "dense_queries": out / "dense_queries.jsonl",
    }
    with open(paths["corpus"], "w", encoding="utf-8") as handle:
        for doc in bench.corpus:
            handle.write(json.dumps({"id": doc.id, "text": doc.text}) + "\n")
    with open(paths["queries"], "w", encoding="utf-8") as handle:
        for query in bench.queries:
            handle.write(json.dumps({"id": query.id, "text": query.text}) + "\n")
    with open(paths["qrels"], "w", encoding="utf-8") as handle:
        for query_id, relevant in bench.qrels.items():
            for doc_id in sorted(relevant):
                handle.write(f"{query_id} 0 {doc_id} 1\n")
    with open(paths["dense_docs"], "w", encoding="utf-8") as handle:
        for doc_id, vector in bench.doc_vectors.items():
            handle.write(json.dumps({"id": doc_id, "vector": vector}) + "\n")
    with open(paths["dense_queries"], "w", encoding="utf-8") as handle:
        for query_id, vector in bench.query_vectors.items():
            handle.write(json.dumps({"id": query_id, "vector": vector}) + "\n")
    return paths


def _main() -> None:
    import argparse

    parser = argparse.ArgumentParser(
        description="Generate the deterministic synthetic retrieval benchmark."
    )
    parser.add_argument("out_dir")
    parser.add_argument("--n-docs", type=int, default=200)
    parser.add_argument("--n-queries", type=int, default=20)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    paths = write_benchmark(
        args.out_dir, n_docs=args.n_docs, n_queries=args.n_queries, dim=args.dim, seed=args.seed
    )
    for name, path in paths.items():
        print(f"{name}: {path}")


if __name__ == "__main__":
    _main()
