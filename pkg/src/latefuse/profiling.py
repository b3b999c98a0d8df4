"""Inference-cost accounting: FLOPs estimates, index sizes, query latency.

The FLOPs estimators are closed-form cost models per query, parameterized by
:class:`CostModelInputs`. Encoder forward-pass costs are inputs, not
computed here — they come from an external profiler run against the actual
model. Two documented defaults ship with the package:

* ``BASE_ENCODER_FORWARD_FLOPS = 2.6e9`` — one forward pass of a ~110M-
  parameter text encoder over a 157-token input;
* ``CROSS_ENCODER_PAIR_FLOPS = 2.2e10`` — one forward pass over a full
  512-token query-article pair.

Index-size reports use binary megabytes (MiB, 2**20 bytes) throughout; that
is the convention under which ``dim * bits * corpus_size`` reproduces the
familiar published footprints for 384/768/1024-dim float32 flat indexes.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from .model import ValidationError

BASE_ENCODER_FORWARD_FLOPS = 2.6e9
CROSS_ENCODER_PAIR_FLOPS = 2.2e10

BYTES_PER_MIB = 2**20


@dataclass(frozen=True)
class CostModelInputs:
    """Everything the cost models need. Defaults describe the reference
    configuration: a 27,942-document corpus with 15-token queries and
    157-token articles, 768-dim vectors stored in 32 bits."""

    avg_query_len: float = 15.0
    avg_doc_len: float = 157.0
    corpus_size: int = 27_942
    dim: int = 768
    bits_per_value: int = 32
    forward_pass_flops: float = BASE_ENCODER_FORWARD_FLOPS
    avg_query_nonzeros: float = 178.0
    avg_posting_len: float = 378.0
    rerank_depth: int = 1000
    cross_encoder_flops: float = CROSS_ENCODER_PAIR_FLOPS

    def __post_init__(self) -> None:
        for name in (
            "avg_query_len",
            "avg_doc_len",
            "dim",
            "bits_per_value",
            "forward_pass_flops",
            "avg_query_nonzeros",
            "avg_posting_len",
            "rerank_depth",
            "cross_encoder_flops",
        ):
            value = getattr(self, name)
            if value < 0 or not math.isfinite(float(value)):
                raise ValidationError(f"{name} must be non-negative and finite, got {value}")
        if self.corpus_size < 1:
            raise ValidationError(f"corpus_size must be >= 1, got {self.corpus_size}")


def flops_bm25(inputs: CostModelInputs) -> float:
    """4 operations (two multiplications, one addition, one division) per
    query-term/document pair, over the whole corpus."""
    return 4.0 * inputs.avg_query_len * inputs.corpus_size


def flops_dense(inputs: CostModelInputs) -> float:
    """One query encoding plus a d-dim inner product (2d - 1 ops) per document."""
    return inputs.forward_pass_flops + (2.0 * inputs.dim - 1.0) * inputs.corpus_size


def flops_sparse(inputs: CostModelInputs) -> float:
    """One query encoding plus a multiply-add per posting visited across the
    query's non-zero terms."""
    return inputs.forward_pass_flops + 2.0 * inputs.avg_query_nonzeros * inputs.avg_posting_len


def flops_multivector(inputs: CostModelInputs) -> float:
    """Late-interaction search cost from its component operations.

    Per document: 2 * dim * q * a token-level inner-product ops, q * a
    comparisons for the per-query-token max, and q ops for the final
    reduction (q = avg query tokens, a = avg document tokens).
    """
    q = inputs.avg_query_len
    a = inputs.avg_doc_len
    per_doc = 2.0 * inputs.dim * q * a + q * a + q
    return inputs.forward_pass_flops + per_doc * inputs.corpus_size


def flops_multivector_query_scaled(inputs: CostModelInputs) -> float:
    """Variant that charges the full per-document interaction once per query
    token (an extra factor of query length over the component form). Reported
    alongside the primary estimate for auditability; the two forms disagree
    and this toolkit does not pick a winner."""
    q = inputs.avg_query_len
    a = inputs.avg_doc_len
    return inputs.forward_pass_flops + q * q * (2.0 * inputs.dim * a + a + 1.0) * inputs.corpus_size


def flops_cross_encoder(inputs: CostModelInputs) -> float:
    """One full forward pass per re-ranked candidate."""
    return inputs.rerank_depth * inputs.cross_encoder_flops


def estimate_flat_index_size(dim: int, bits_per_value: int, corpus_size: int) -> float:
    """Bytes needed to store corpus_size row-major dim-dim vectors at the
    given precision: dim * bits * corpus_size / 8."""
    if dim < 1 or bits_per_value < 1 or corpus_size < 1:
        raise ValidationError("dim, bits_per_value, and corpus_size must all be >= 1")
    return dim * bits_per_value * corpus_size / 8


def bytes_to_mib(n_bytes: float) -> float:
    return n_bytes / BYTES_PER_MIB


@dataclass(frozen=True)
class FlopsReport:
    """Per-family FLOPs estimates with the inputs that produced them."""

    inputs: CostModelInputs
    bm25: float
    dense: float
    sparse: float
    multivector: float
    multivector_query_scaled: float
    cross_encoder: float

    def to_json_dict(self) -> dict:
        return {
            "inputs": asdict(self.inputs),
            "flops": {
                "bm25": self.bm25,
                "dense": self.dense,
                "sparse": self.sparse,
                "multivector": self.multivector,
                "multivector_query_scaled": self.multivector_query_scaled,
                "cross_encoder": self.cross_encoder,
            },
        }


def flops_report(inputs: CostModelInputs) -> FlopsReport:
    return FlopsReport(
        inputs=inputs,
        bm25=flops_bm25(inputs),
        dense=flops_dense(inputs),
        sparse=flops_sparse(inputs),
        multivector=flops_multivector(inputs),
        multivector_query_scaled=flops_multivector_query_scaled(inputs),
        cross_encoder=flops_cross_encoder(inputs),
    )


@dataclass(frozen=True)
class IndexSizeReport:
    label: str
    size_bytes: float
    plaintext_bytes: float | None = None

    @property
    def mib(self) -> float:
        return bytes_to_mib(self.size_bytes)

    @property
    def ratio_to_plaintext(self) -> float | None:
        if not self.plaintext_bytes:
            return None
        return self.size_bytes / self.plaintext_bytes

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "bytes": self.size_bytes,
            "mib": self.mib,
            "ratio_to_plaintext": self.ratio_to_plaintext,
        }


@dataclass(frozen=True)
class LatencyReport:
    """Per-query wall-clock timings, batch size one, monotonic clock."""

    samples: tuple[float, ...]
    warmup: int

    @property
    def mean_seconds(self) -> float:
        return sum(self.samples) / len(self.samples)

    @property
    def min_seconds(self) -> float:
        return min(self.samples)

    @property
    def max_seconds(self) -> float:
        return max(self.samples)

    @property
    def count(self) -> int:
        return len(self.samples)

    def to_json_dict(self) -> dict:
        return {
            "mean_seconds": self.mean_seconds,
            "min_seconds": self.min_seconds,
            "max_seconds": self.max_seconds,
            "count": self.count,
            "warmup": self.warmup,
            "samples": list(self.samples),
        }


def measure_latency(search_fn, queries, warmup: int = 3) -> LatencyReport:
    """Time a search callable one query at a time (streaming, batch size 1).

    The first ``warmup`` calls (cycling through the queries) go unrecorded;
    each remaining query is then timed individually.
    """
    queries = list(queries)
    if not queries:
        raise ValidationError("latency measurement needs at least one query")
    if warmup < 0:
        raise ValidationError(f"warmup must be >= 0, got {warmup}")
    for i in range(warmup):
        search_fn(queries[i % len(queries)])
    samples = []
    for query in queries:
        start = time.perf_counter()
        search_fn(query)
        samples.append(time.perf_counter() - start)
    return LatencyReport(tuple(samples), warmup)


def save_profile_json(
    path: str | Path,
    flops: FlopsReport,
    index_sizes: list[IndexSizeReport],
    latency: LatencyReport | None = None,
) -> None:
    payload = {
        "flops": flops.to_json_dict(),
        "index_sizes": [report.to_json_dict() for report in index_sizes],
    }
    if latency is not None:
        payload["latency"] = latency.to_json_dict()
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
