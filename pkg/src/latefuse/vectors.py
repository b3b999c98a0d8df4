"""Vector stores for precomputed embeddings, with exhaustive scoring.

Three store kinds, all searched brute-force (no ANN structures — exact
scoring keeps the output identical to an all-pairs oracle and is the right
trade-off at the corpus sizes this toolkit targets):

* :class:`FlatDenseIndex` — one d-dimensional vector per document, scored by
  inner product (cosine when both sides are unit-normalized).
* :class:`SparseIndex` — one non-negative term-weight map per document,
  scored through an inverted index; exactly equivalent to the dot product of
  the expanded vectors.
* :class:`MultiVectorStore` — one token-embedding matrix per document,
  scored by summing, over query tokens, the maximum token-level inner
  product (late interaction).

JSONL ingestion formats: ``{"id": ..., "vector": [...]}`` (dense),
``{"id": ..., "weights": {...}}`` (sparse), ``{"id": ..., "tokens": [[...],
...]}`` (multi-vector).

Dense matrices also round-trip through a binary interchange format: a
16-byte header — magic ``FBVX``, version u32, dim u32, reserved u32, all
little-endian — followed by row-major IEEE-754 float32 values (row count is
implied by file size). Doc ids live in a companion newline-delimited file,
row order aligned; by default at ``<matrix path> + ".ids"``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import ParseError, RunList, ValidationError

_FBVX_MAGIC = b"FBVX"
_FBVX_VERSION = 1
_FBVX_HEADER = struct.Struct("<4sIII")


def _as_finite_array(values, record_id: str, expected_dim: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"record {record_id!r}: vector must be one-dimensional")
    if expected_dim is not None and arr.shape[0] != expected_dim:
        raise ValidationError(
            f"record {record_id!r}: dimension {arr.shape[0]} != expected {expected_dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"record {record_id!r}: vector contains NaN or Inf")
    return arr


def _normalize_rows(matrix: np.ndarray, record_id: str) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValidationError(f"record {record_id!r}: cannot normalize a zero vector")
    return matrix / norms


def _iter_jsonl(path: str | Path):
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict) or "id" not in record:
                raise ParseError(f"{path}:{lineno}: expected a JSON object with an 'id'")
            yield lineno, record


class FlatDenseIndex:
    """Row-major matrix of document vectors plus the aligned id list."""

    def __init__(self, ids: list[str], matrix: np.ndarray, normalized: bool = False):
        if len(ids) != matrix.shape[0]:
            raise ValidationError("id list and matrix row count disagree")
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate document ids in dense index")
        self.ids = list(ids)
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.normalized = normalized

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


class SparseIndex:
    """Inverted index over non-negative term weights."""

    def __init__(self, vectors: dict[str, dict[str, float]]):
        self.ids = list(vectors)
        postings: dict[str, list[tuple[str, float]]] = {}
        nonzeros: dict[str, int] = {}
        for doc_id, weights in vectors.items():
            count = 0
            for term, weight in weights.items():
                if weight > 0:
                    postings.setdefault(term, []).append((doc_id, float(weight)))
                    count += 1
            nonzeros[doc_id] = count
        self.postings = postings
        self.nonzero_counts = nonzeros

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def avg_posting_len(self) -> float:
        if not self.postings:
            return 0.0
        return sum(len(p) for p in self.postings.values()) / len(self.postings)


class MultiVectorStore:
    """Per-document token-embedding matrices, all with a common dimension."""

    def __init__(self, ids: list[str], matrices: list[np.ndarray], normalized: bool = False):
        if len(ids) != len(matrices):
            raise ValidationError("id list and matrix list lengths disagree")
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate document ids in multi-vector store")
        self.ids = list(ids)
        self.matrices = [np.asarray(m, dtype=np.float64) for m in matrices]
        self.normalized = normalized

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[1]

    def __len__(self) -> int:
        return len(self.ids)


def ingest_dense(path: str | Path, normalize: bool = False) -> FlatDenseIndex:
    """Load dense vectors from JSONL (or the binary format, by extension).

    All vectors must share one dimension; NaN/Inf values are rejected with
    the offending record named. With ``normalize`` the stored rows are
    L2-normalized so inner products become cosines.
    """
    if str(path).endswith(".fbvx"):
        return load_dense_binary(path, normalize=normalize)
    ids: list[str] = []
    rows: list[np.ndarray] = []
    dim: int | None = None
    for lineno, record in _iter_jsonl(path):
        if "vector" not in record:
            raise ParseError(f"{path}:{lineno}: missing 'vector' field")
        record_id = str(record["id"])
        row = _as_finite_array(record["vector"], record_id, dim)
        dim = row.shape[0]
        if normalize:
            row = _normalize_rows(row, record_id)
        ids.append(record_id)
        rows.append(row)
    if not rows:
        raise ValidationError(f"{path}: no vectors found")
    return FlatDenseIndex(ids, np.vstack(rows), normalized=normalize)


def ingest_sparse(path: str | Path) -> SparseIndex:
    """Load sparse term-weight vectors from JSONL. Weights must be >= 0 and finite."""
    vectors: dict[str, dict[str, float]] = {}
    for lineno, record in _iter_jsonl(path):
        if "weights" not in record or not isinstance(record["weights"], dict):
            raise ParseError(f"{path}:{lineno}: missing 'weights' object")
        record_id = str(record["id"])
        if record_id in vectors:
            raise ValidationError(f"{path}:{lineno}: duplicate id {record_id!r}")
        weights: dict[str, float] = {}
        for term, weight in record["weights"].items():
            value = float(weight)
            if not np.isfinite(value):
                raise ValidationError(f"record {record_id!r}: non-finite weight for {term!r}")
            if value < 0:
                raise ValidationError(f"record {record_id!r}: negative weight for {term!r}")
            if value > 0:
                weights[term] = value
        vectors[record_id] = weights
    if not vectors:
        raise ValidationError(f"{path}: no vectors found")
    return SparseIndex(vectors)


def ingest_multivector(path: str | Path, normalize: bool = False) -> MultiVectorStore:
    """Load per-document token matrices from JSONL; every document needs >= 1 token."""
    ids: list[str] = []
    matrices: list[np.ndarray] = []
    dim: int | None = None
    for lineno, record in _iter_jsonl(path):
        if "tokens" not in record:
            raise ParseError(f"{path}:{lineno}: missing 'tokens' field")
        record_id = str(record["id"])
        tokens = record["tokens"]
        if not tokens:
            raise ValidationError(f"record {record_id!r}: token matrix must have >= 1 row")
        try:
            matrix = np.asarray(tokens, dtype=np.float64)
        except ValueError:
            raise ValidationError(
                f"record {record_id!r}: token rows have unequal lengths"
            ) from None
        if matrix.ndim != 2:
            raise ValidationError(f"record {record_id!r}: token rows have unequal lengths")
        if dim is not None and matrix.shape[1] != dim:
            raise ValidationError(
                f"record {record_id!r}: dimension {matrix.shape[1]} != expected {dim}"
            )
        dim = matrix.shape[1]
        if not np.all(np.isfinite(matrix)):
            raise ValidationError(f"record {record_id!r}: tokens contain NaN or Inf")
        if normalize:
            matrix = _normalize_rows(matrix, record_id)
        ids.append(record_id)
        matrices.append(matrix)
    if not ids:
        raise ValidationError(f"{path}: no vectors found")
    return MultiVectorStore(ids, matrices, normalized=normalize)


def dump_dense(index: FlatDenseIndex, path: str | Path) -> None:
    """Write a dense index back to JSONL at full double precision."""
    with open(path, "w", encoding="utf-8") as handle:
        for doc_id, row in zip(index.ids, index.matrix):
            vector = [float(v) for v in row]
            handle.write(json.dumps({"id": doc_id, "vector": vector}) + "\n")


def dump_dense_binary(
    index: FlatDenseIndex, path: str | Path, ids_path: str | Path | None = None
) -> None:
    """Write the binary (float32) interchange form plus the companion id file."""
    ids_path = Path(ids_path) if ids_path is not None else Path(str(path) + ".ids")
    header = _FBVX_HEADER.pack(_FBVX_MAGIC, _FBVX_VERSION, index.dim, 0)
    payload = np.ascontiguousarray(index.matrix, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)
    ids_path.write_text("".join(doc_id + "\n" for doc_id in index.ids), encoding="utf-8")


def load_dense_binary(
    path: str | Path, ids_path: str | Path | None = None, normalize: bool = False
) -> FlatDenseIndex:
    ids_path = Path(ids_path) if ids_path is not None else Path(str(path) + ".ids")
    data = Path(path).read_bytes()
    if len(data) < _FBVX_HEADER.size:
        raise ValidationError(f"{path}: file too small for a binary matrix header")
    magic, version, dim, _ = _FBVX_HEADER.unpack_from(data)
    if magic != _FBVX_MAGIC:
        raise ValidationError(f"{path}: not a binary matrix file (bad magic)")
    if version != _FBVX_VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    if dim == 0:
        raise ValidationError(f"{path}: zero dimension")
    body = len(data) - _FBVX_HEADER.size
    if body % (4 * dim):
        raise ValidationError(f"{path}: payload is not a whole number of {dim}-dim rows")
    rows = body // (4 * dim)
    matrix = np.frombuffer(data, dtype="<f4", offset=_FBVX_HEADER.size).reshape(rows, dim)
    matrix = matrix.astype(np.float64)
    ids = ids_path.read_text(encoding="utf-8").splitlines()
    if len(ids) != rows:
        raise ValidationError(
            f"{ids_path}: {len(ids)} ids for {rows} matrix rows (files misaligned)"
        )
    if normalize:
        matrix = _normalize_rows(matrix, "<binary matrix>")
    return FlatDenseIndex(ids, matrix, normalized=normalize)


def dense_search(
    index: FlatDenseIndex,
    query_vector,
    k: int,
    query_id: str = "q",
    system_id: str = "dense",
) -> RunList:
    """Top-k documents by inner product; ties broken by ascending doc id."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    query = _as_finite_array(query_vector, "<query>", index.dim)
    scores = index.matrix @ query
    pairs = {doc_id: float(s) for doc_id, s in zip(index.ids, scores)}
    return RunList.from_scores(query_id, system_id, pairs, k=k)


def sparse_search(
    index: SparseIndex,
    query_weights: dict[str, float],
    k: int,
    query_id: str = "q",
    system_id: str = "sparse",
) -> RunList:
    """Postings-traversal dot product between a sparse query and all documents.

    Identical to the dense dot product of the expanded vectors. An empty
    query yields an empty run.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    active = {t: float(w) for t, w in query_weights.items() if w != 0}
    for term, weight in active.items():
        if not np.isfinite(weight):
            raise ValidationError(f"query weight for {term!r} is not finite")
        if weight < 0:
            raise ValidationError(f"query weight for {term!r} is negative")
    if not active:
        return RunList(query_id, system_id, ())
    scores = dict.fromkeys(index.ids, 0.0)
    for term, query_weight in active.items():
        for doc_id, doc_weight in index.postings.get(term, ()):
            scores[doc_id] += query_weight * doc_weight
    return RunList.from_scores(query_id, system_id, scores, k=k)


def maxsim_score(query_tokens, doc_tokens) -> float:
    """Late-interaction relevance: sum over query tokens of the best
    token-level inner product against the document."""
    query = np.asarray(query_tokens, dtype=np.float64)
    doc = np.asarray(doc_tokens, dtype=np.float64)
    if query.ndim != 2 or doc.ndim != 2:
        raise ValidationError("token inputs must be 2-d matrices")
    if query.shape[0] < 1 or doc.shape[0] < 1:
        raise ValidationError("token matrices must have >= 1 row")
    if query.shape[1] != doc.shape[1]:
        raise ValidationError(
            f"token dimension mismatch: query {query.shape[1]} vs document {doc.shape[1]}"
        )
    return float((query @ doc.T).max(axis=1).sum())


def multivector_search(
    store: MultiVectorStore,
    query_tokens,
    k: int,
    query_id: str = "q",
    system_id: str = "multivector",
) -> RunList:
    """Exhaustive late-interaction search over every stored document."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    query = np.asarray(query_tokens, dtype=np.float64)
    scores = {
        doc_id: maxsim_score(query, matrix)
        for doc_id, matrix in zip(store.ids, store.matrices)
    }
    return RunList.from_scores(query_id, system_id, scores, k=k)
