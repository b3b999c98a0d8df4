"""Hybrid retrieval and late-fusion toolkit.

Index text corpora (BM25) and precomputed embeddings (dense, learned-sparse,
token-level), fuse the resulting ranked lists by rank or normalized score,
evaluate with standard binary-relevance metrics, and account for inference
cost. See the ``latefuse`` CLI for the end-to-end workflow.
"""

from .analysis import (
    ComplementarityReport,
    PairSample,
    complementarity_report,
    export_histograms,
    quadrant_classify,
    sample_pairs,
)
from .fusion import (
    FusionSpec,
    ScoreDistribution,
    build_score_distribution,
    fuse,
    fuse_bcf,
    fuse_many,
    fuse_nsf,
    fuse_rrf,
    normalize,
    rank_positions,
    tune_weights,
    weight_grid,
)
from .io import read_corpus, read_qrels, read_queries, read_run, write_run
from .lexical import (
    Bm25Params,
    LexicalIndex,
    bm25_score,
    bm25_search,
    build_lexical_index,
    load_lexical_index,
    save_lexical_index,
    tokenize,
)
from .metrics import (
    MetricReport,
    evaluate_run,
    r_precision,
    recall_at_k,
    resolve_metric,
    rr_at_k,
)
from .model import (
    Corpus,
    Document,
    ParseError,
    Qrels,
    Query,
    RunList,
    ValidationError,
)
from .profiling import (
    CostModelInputs,
    FlopsReport,
    IndexSizeReport,
    LatencyReport,
    estimate_flat_index_size,
    flops_bm25,
    flops_cross_encoder,
    flops_dense,
    flops_multivector,
    flops_multivector_query_scaled,
    flops_report,
    flops_sparse,
    measure_latency,
)
from .vectors import (
    FlatDenseIndex,
    MultiVectorStore,
    SparseIndex,
    dense_search,
    dump_dense,
    dump_dense_binary,
    ingest_dense,
    ingest_multivector,
    ingest_sparse,
    load_dense_binary,
    maxsim_score,
    multivector_search,
    sparse_search,
)

__version__ = "0.1.0"
