"""Rank-aware evaluation metrics over binary relevance judgments.

All metrics depend only on the ordering of a run, never on raw score
magnitudes, and all lie in [0, 1]. Queries with zero judged-relevant
documents have undefined denominators; ``evaluate_run`` excludes them from
macro averages and reports them as skipped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .model import Qrels, RunList, ValidationError


def _relevant_or_raise(run: RunList, qrels: Qrels) -> frozenset[str]:
    relevant = qrels.relevant(run.query_id)
    if not relevant:
        raise ValidationError(
            f"query {run.query_id!r} has no judged-relevant documents"
        )
    return relevant


def recall_at_k(run: RunList, qrels: Qrels, k: int) -> float:
    """Fraction of the query's relevant documents found in the top-k."""
    relevant = _relevant_or_raise(run, qrels)
    hits = sum(1 for doc_id, _ in run.entries[:k] if doc_id in relevant)
    return hits / len(relevant)


def rr_at_k(run: RunList, qrels: Qrels, k: int) -> float:
    """Reciprocal of the first relevant position within the top-k; 0 if none."""
    relevant = _relevant_or_raise(run, qrels)
    for position, (doc_id, _) in enumerate(run.entries[:k], start=1):
        if doc_id in relevant:
            return 1.0 / position
    return 0.0


def r_precision(run: RunList, qrels: Qrels) -> float:
    """Precision at cutoff N, where N is the query's number of relevant docs.

    A run shorter than N keeps N as the denominator.
    """
    relevant = _relevant_or_raise(run, qrels)
    n = len(relevant)
    hits = sum(1 for doc_id, _ in run.entries[:n] if doc_id in relevant)
    return hits / n


def resolve_metric(spec: str):
    """Turn a metric spec string into ``(name, fn(run, qrels) -> float)``.

    Accepted forms: ``recall@K`` / ``r@K``, ``mrr@K`` / ``rr@K``, ``rp`` /
    ``rprecision``.
    """
    text = spec.strip().lower()
    if text in ("rp", "rprecision", "r-precision"):
        return "RP", r_precision
    if "@" in text:
        name, _, cutoff_text = text.partition("@")
        try:
            cutoff = int(cutoff_text)
        except ValueError:
            raise ValidationError(f"bad metric cutoff in {spec!r}") from None
        if cutoff < 1:
            raise ValidationError(f"metric cutoff must be >= 1 in {spec!r}")
        if name in ("recall", "r"):
            return f"R@{cutoff}", lambda run, qrels: recall_at_k(run, qrels, cutoff)
        if name in ("mrr", "rr"):
            return f"MRR@{cutoff}", lambda run, qrels: rr_at_k(run, qrels, cutoff)
    raise ValidationError(f"unknown metric spec {spec!r}")


@dataclass
class MetricReport:
    """Per-query metric values plus their macro (arithmetic-mean) averages."""

    per_query: dict[str, dict[str, float]]
    macro: dict[str, float]
    evaluated_query_ids: tuple[str, ...]
    skipped_query_ids: tuple[str, ...] = field(default_factory=tuple)

    def to_json_dict(self) -> dict:
        return {
            "macro": self.macro,
            "per_query": self.per_query,
            "evaluated_queries": len(self.evaluated_query_ids),
            "skipped_queries": list(self.skipped_query_ids),
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def format_table(self) -> str:
        """Aligned text table: one row per metric, macro value last."""
        names = list(self.macro)
        width = max((len(n) for n in names), default=6)
        lines = [
            f"{'metric'.ljust(width)}  {'macro':>10}",
            f"{'-' * width}  {'-' * 10}",
        ]
        for name in names:
            lines.append(f"{name.ljust(width)}  {self.macro[name]:>10.4f}")
        lines.append(
            f"evaluated {len(self.evaluated_query_ids)} queries"
            + (f", skipped {len(self.skipped_query_ids)}" if self.skipped_query_ids else "")
        )
        return "\n".join(lines)


def evaluate_run(
    runs: list[RunList], qrels: Qrels, cutoffs: tuple[int, ...] = (10,)
) -> MetricReport:
    """Evaluate R@k and MRR@k at each cutoff, plus RP, macro-averaged.

    Queries absent from the qrels (or judged with no relevant documents) are
    skipped and reported; an empty intersection of run and qrels queries is
    an error.
    """
    if not cutoffs or any(k < 1 for k in cutoffs):
        raise ValidationError(f"cutoffs must be positive integers, got {cutoffs!r}")
    evaluated: list[str] = []
    skipped: list[str] = []
    per_query: dict[str, dict[str, float]] = {}
    for run in runs:
        if not qrels.relevant(run.query_id):
            skipped.append(run.query_id)
            continue
        values: dict[str, float] = {}
        for k in cutoffs:
            values[f"R@{k}"] = recall_at_k(run, qrels, k)
            values[f"MRR@{k}"] = rr_at_k(run, qrels, k)
        values["RP"] = r_precision(run, qrels)
        per_query[run.query_id] = values
        evaluated.append(run.query_id)
    if not evaluated:
        raise ValidationError("no evaluable queries: run and qrels do not overlap")
    names = [f"R@{k}" for k in cutoffs] + [f"MRR@{k}" for k in cutoffs] + ["RP"]
    macro = {
        name: sum(per_query[qid][name] for qid in evaluated) / len(evaluated)
        for name in names
    }
    return MetricReport(per_query, macro, tuple(evaluated), tuple(skipped))
