"""Late fusion of per-system ranked lists, by rank or by normalized score.

Rank-based methods consume only each system's ordering and are therefore
invariant under any strictly monotone rescaling of its scores:

* Borda counting: each system contributes ``len(list) - rank + 1``.
* Reciprocal-rank: each system contributes ``1 / (rrf_k + rank)``; the
  constant (default 60) damps the emphasis on top ranks.

A document's rank is 1 plus the number of strictly higher-scored candidates
in that system's list, so tied scores share the best rank of their group.

Score-based fusion (``fuse_nsf``) sums per-system scores after one of three
normalizations, weighted by non-negative coefficients summing to one:

* min-max — affine map of the query's candidate scores onto [0, 1];
* z-score — center by the candidate-list mean, scale by its population
  standard deviation;
* percentile — replace each raw score by its empirical CDF value in the
  system's global score distribution (midpoint convention for ties), which
  aligns systems whose raw score shapes differ.

Documents a system did not return contribute 0 under the rank methods and
receive that system's per-query minimum normalized score under score
fusion. Degenerate constant-score lists normalize to 0.5 (min-max) or 0.0
(z-score): a constant list carries no ordering information, so a neutral
value avoids spurious dominance.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import resolve_metric
from .model import Qrels, RunList, ValidationError

DEFAULT_RRF_K = 60.0

#: Exact-sample cap for global score distributions; beyond it a uniform
#: reservoir is kept instead.
DISTRIBUTION_SAMPLE_CAP = 10_000_000

_NORMALIZATIONS = {
    "minmax": "minmax",
    "min-max": "minmax",
    "zscore": "zscore",
    "z-score": "zscore",
    "percentile": "percentile",
}

_METHODS = ("bcf", "rrf", "nsf")


def canonical_normalization(name: str) -> str:
    try:
        return _NORMALIZATIONS[name.strip().lower()]
    except KeyError:
        raise ValidationError(
            f"unknown normalization {name!r} (expected min-max, z-score, or percentile)"
        ) from None


def rank_positions(run: RunList) -> dict[str, int]:
    """Rank of each document: 1 + count of strictly higher scores (ties share)."""
    ranks: dict[str, int] = {}
    current_rank = 1
    previous_score: float | None = None
    for position, (doc_id, score) in enumerate(run.entries, start=1):
        if previous_score is None or score < previous_score:
            current_rank = position
            previous_score = score
        ranks[doc_id] = current_rank
    return ranks


def _common_query_id(runs: list[RunList]) -> str:
    if not runs:
        raise ValidationError("fusion requires at least one input run")
    query_ids = {run.query_id for run in runs}
    if len(query_ids) != 1:
        raise ValidationError(f"fusion inputs span multiple queries: {sorted(query_ids)}")
    return runs[0].query_id


def fuse_bcf(runs: list[RunList], tag: str = "bcf") -> RunList:
    """Borda-count fusion: sum of (list length - rank + 1) over systems."""
    query_id = _common_query_id(runs)
    totals: dict[str, float] = {}
    for run in runs:
        length = len(run.entries)
        for doc_id, rank in rank_positions(run).items():
            totals[doc_id] = totals.get(doc_id, 0.0) + (length - rank + 1)
    return RunList.from_scores(query_id, tag, totals)


def fuse_rrf(runs: list[RunList], rrf_k: float = DEFAULT_RRF_K, tag: str = "rrf") -> RunList:
    """Reciprocal-rank fusion: sum of 1 / (rrf_k + rank) over systems."""
    if not rrf_k > 0:
        raise ValidationError(f"rrf constant must be > 0, got {rrf_k}")
    query_id = _common_query_id(runs)
    totals: dict[str, float] = {}
    for run in runs:
        for doc_id, rank in rank_positions(run).items():
            totals[doc_id] = totals.get(doc_id, 0.0) + 1.0 / (rrf_k + rank)
    return RunList.from_scores(query_id, tag, totals)


class ScoreDistribution:
    """A system's empirical global score distribution.

    Holds a sorted sample; ``lookup`` returns the midpoint empirical CDF
    value ``(count_less + count_less_or_equal) / (2n)``, which is monotone
    non-decreasing and unbiased under ties.
    """

    def __init__(self, system_id: str, scores, total_count: int | None = None):
        sample = np.sort(np.asarray(list(scores), dtype=np.float64))
        if sample.size == 0:
            raise ValidationError("a score distribution needs at least one score")
        if not np.all(np.isfinite(sample)):
            raise ValidationError("score distribution contains non-finite values")
        self.system_id = system_id
        self._sample = sample
        self.total_count = int(total_count) if total_count is not None else sample.size

    @property
    def sample(self) -> np.ndarray:
        return self._sample

    @property
    def size(self) -> int:
        return int(self._sample.size)

    def lookup(self, value: float) -> float:
        n = self._sample.size
        less = int(np.searchsorted(self._sample, value, side="left"))
        less_or_equal = int(np.searchsorted(self._sample, value, side="right"))
        return (less + less_or_equal) / (2 * n)

    def quartiles(self) -> tuple[float, float, float]:
        q1, med, q3 = np.percentile(self._sample, [25, 50, 75], method="midpoint")
        return float(q1), float(med), float(q3)

    def save(self, path: str | Path) -> None:
        payload = {
            "system_id": self.system_id,
            "total_count": self.total_count,
            "sample": [float(v) for v in self._sample],
        }
        Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ScoreDistribution":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(payload["system_id"], payload["sample"], payload.get("total_count"))


def build_score_distribution(
    system_id: str,
    runs: list[RunList],
    sample_cap: int = DISTRIBUTION_SAMPLE_CAP,
    seed: int = 0,
) -> ScoreDistribution:
    """Pool every (query, doc) score from a system's runs into one distribution.

    Exact up to ``sample_cap`` scores; beyond that a uniform reservoir
    (seeded, hence reproducible) stands in for the full sample. The true
    pooled count is kept in ``total_count`` either way.
    """
    reservoir: list[float] = []
    rng = random.Random(seed)
    total = 0
    for run in runs:
        for _, score in run.entries:
            total += 1
            if len(reservoir) < sample_cap:
                reservoir.append(score)
            else:
                slot = rng.randrange(total)
                if slot < sample_cap:
                    reservoir[slot] = score
    if total == 0:
        raise ValidationError(f"system {system_id!r}: no scores to pool")
    return ScoreDistribution(system_id, reservoir, total_count=total)


def normalize(
    scores: list[float], method: str, dist: ScoreDistribution | None = None
) -> list[float]:
    """Normalize one query's candidate scores.

    min-max and z-score operate on the given list alone; percentile replaces
    each score by its CDF value in ``dist`` (required for that method).
    """
    if not scores:
        raise ValidationError("cannot normalize an empty score list")
    method = canonical_normalization(method)
    if method == "minmax":
        low, high = min(scores), max(scores)
        if high == low:
            return [0.5] * len(scores)
        span = high - low
        return [(s - low) / span for s in scores]
    if method == "zscore":
        n = len(scores)
        mean = sum(scores) / n
        variance = sum((s - mean) ** 2 for s in scores) / n
        if variance == 0.0:
            return [0.0] * len(scores)
        std = math.sqrt(variance)
        return [(s - mean) / std for s in scores]
    if dist is None:
        raise ValidationError("percentile normalization requires a score distribution")
    return [dist.lookup(s) for s in scores]


def equal_weights(n_systems: int) -> tuple[float, ...]:
    return tuple(1.0 / n_systems for _ in range(n_systems))


def _check_weights(weights, n_systems: int) -> tuple[float, ...]:
    weights = tuple(float(w) for w in weights)
    if len(weights) != n_systems:
        raise ValidationError(
            f"{len(weights)} weights for {n_systems} systems"
        )
    if any(w < 0 for w in weights):
        raise ValidationError(f"weights must be non-negative: {weights}")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValidationError(f"weights must sum to 1 within 1e-9: sum={sum(weights)!r}")
    return weights


def fuse_nsf(
    runs: list[RunList],
    weights=None,
    normalization: str = "zscore",
    dists: list[ScoreDistribution] | None = None,
    tag: str = "nsf",
) -> RunList:
    """Weighted sum of per-system normalized scores over the union of candidates.

    ``weights`` defaults to equal (plain unweighted score summation after
    normalization). ``dists`` must align with ``runs`` when the percentile
    normalization is used.
    """
    query_id = _common_query_id(runs)
    method = canonical_normalization(normalization)
    if weights is None:
        weights = equal_weights(len(runs))
    weights = _check_weights(weights, len(runs))
    if method == "percentile":
        if dists is None or len(dists) != len(runs):
            raise ValidationError(
                "percentile fusion needs one score distribution per system"
            )
    pool: set[str] = set()
    for run in runs:
        pool.update(run.doc_ids)
    totals = dict.fromkeys(pool, 0.0)
    for system_index, run in enumerate(runs):
        weight = weights[system_index]
        if not run.entries:
            continue
        raw = [score for _, score in run.entries]
        dist = dists[system_index] if dists is not None else None
        normed = normalize(raw, method, dist)
        floor = min(normed)
        contributions = dict(zip(run.doc_ids, normed))
        for doc_id in pool:
            totals[doc_id] += weight * contributions.get(doc_id, floor)
    return RunList.from_scores(query_id, tag, totals)


@dataclass(frozen=True)
class FusionSpec:
    """A complete fusion configuration, expressible as CLI flags or as
    ``key=value`` config lines (``method=nsf``, ``norm=zscore``,
    ``weights=0.2,0.8``, ``rrf_k=60``)."""

    method: str = "nsf"
    normalization: str = "zscore"
    weights: tuple[float, ...] | None = None
    rrf_k: float = DEFAULT_RRF_K

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ValidationError(f"unknown fusion method {self.method!r}")
        object.__setattr__(self, "normalization", canonical_normalization(self.normalization))
        if not self.rrf_k > 0:
            raise ValidationError(f"rrf constant must be > 0, got {self.rrf_k}")
        if self.weights is not None:
            object.__setattr__(
                self, "weights", _check_weights(self.weights, len(self.weights))
            )

    @classmethod
    def from_mapping(cls, mapping: dict) -> "FusionSpec":
        kwargs: dict = {}
        if "method" in mapping and mapping["method"] is not None:
            kwargs["method"] = str(mapping["method"]).strip().lower()
        if "norm" in mapping and mapping["norm"] is not None:
            kwargs["normalization"] = str(mapping["norm"])
        if "weights" in mapping and mapping["weights"] is not None:
            raw = mapping["weights"]
            if isinstance(raw, str):
                raw = [part for part in raw.split(",") if part.strip()]
            kwargs["weights"] = tuple(float(value) for value in raw)
        if "rrf_k" in mapping and mapping["rrf_k"] is not None:
            kwargs["rrf_k"] = float(mapping["rrf_k"])
        return cls(**kwargs)


def fuse(
    runs: list[RunList],
    spec: FusionSpec,
    dists: list[ScoreDistribution] | None = None,
    tag: str | None = None,
) -> RunList:
    """Apply a FusionSpec to one query's per-system runs."""
    if spec.method == "bcf":
        return fuse_bcf(runs, tag=tag or "bcf")
    if spec.method == "rrf":
        return fuse_rrf(runs, rrf_k=spec.rrf_k, tag=tag or "rrf")
    return fuse_nsf(
        runs, spec.weights, spec.normalization, dists=dists, tag=tag or "nsf"
    )


def group_runs_by_query(runs_by_system: list[list[RunList]]) -> dict[str, list[RunList]]:
    """Align per-system run lists on query id; every system must cover the
    same query set."""
    if not runs_by_system:
        raise ValidationError("no systems to fuse")
    tables: list[dict[str, RunList]] = []
    for runs in runs_by_system:
        table: dict[str, RunList] = {}
        for run in runs:
            if run.query_id in table:
                raise ValidationError(f"system has two runs for query {run.query_id!r}")
            table[run.query_id] = run
        tables.append(table)
    query_ids = set(tables[0])
    for table in tables[1:]:
        if set(table) != query_ids:
            missing = sorted(query_ids.symmetric_difference(table))
            raise ValidationError(
                f"systems cover different query sets (first differences: {missing[:5]})"
            )
    ordered = [run.query_id for run in runs_by_system[0]]
    return {qid: [table[qid] for table in tables] for qid in ordered}


def fuse_many(
    runs_by_system: list[list[RunList]],
    spec: FusionSpec,
    dists: list[ScoreDistribution] | None = None,
    tag: str | None = None,
) -> list[RunList]:
    """Fuse whole run files: one fused RunList per query, in the first
    system's query order."""
    grouped = group_runs_by_query(runs_by_system)
    return [fuse(per_system, spec, dists=dists, tag=tag) for per_system in grouped.values()]


def weight_grid(n_systems: int, step: float = 0.05):
    """All weight vectors on the step-granular simplex, lexicographically.

    ``step`` must evenly divide 1; weights are computed as integer counts
    over the grid resolution so each vector sums to 1 up to one rounding.
    """
    if not 0 < step <= 1:
        raise ValidationError(f"grid step must lie in (0, 1], got {step}")
    resolution = round(1.0 / step)
    if abs(resolution * step - 1.0) > 1e-9:
        raise ValidationError(f"grid step must evenly divide 1, got {step}")

    def compositions(remaining: int, slots: int):
        if slots == 1:
            yield (remaining,)
            return
        for count in range(remaining + 1):
            for rest in compositions(remaining - count, slots - 1):
                yield (count, *rest)

    for counts in compositions(resolution, n_systems):
        yield tuple(count / resolution for count in counts)


def _weight_entropy(weights: tuple[float, ...]) -> float:
    return -sum(w * math.log(w) for w in weights if w > 0)


def tune_weights(
    runs_by_system: list[list[RunList]],
    qrels: Qrels,
    normalization: str = "zscore",
    metric: str = "recall@10",
    step: float = 0.05,
    dists: list[ScoreDistribution] | None = None,
) -> tuple[float, ...]:
    """Exhaustive simplex-grid search for the score-fusion weights maximizing
    a macro-averaged metric over the given queries.

    Ties go to the maximum-entropy (most uniform) vector, then to the
    lexicographically smallest, so the result is deterministic.
    """
    n_systems = len(runs_by_system)
    if not 2 <= n_systems <= 4:
        raise ValidationError(
            f"weight tuning supports 2-4 systems, got {n_systems}"
        )
    _, metric_fn = resolve_metric(metric)
    grouped = group_runs_by_query(runs_by_system)
    evaluable = [qid for qid in grouped if qrels.relevant(qid)]
    if not evaluable:
        raise ValidationError("no queries with relevance judgments to tune on")
    best_weights: tuple[float, ...] | None = None
    best_value = -math.inf
    best_entropy = -math.inf
    for weights in weight_grid(n_systems, step):
        total = 0.0
        for qid in evaluable:
            fused = fuse_nsf(grouped[qid], weights, normalization, dists=dists)
            total += metric_fn(fused, qrels)
        value = total / len(evaluable)
        entropy = _weight_entropy(weights)
        if value > best_value or (value == best_value and entropy > best_entropy):
            best_weights = weights
            best_value = value
            best_entropy = entropy
    assert best_weights is not None
    return best_weights
