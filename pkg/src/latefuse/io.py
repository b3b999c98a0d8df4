"""File ingestion and serialization for corpora, queries, qrels, and runs.

Formats:

* corpus / queries — UTF-8 JSON lines, one object per line with string
  fields ``"id"`` and ``"text"``.
* qrels — TREC text format, whitespace-separated: ``qid 0 docid rel``.
  Judgments with rel > 0 are recorded as relevant; rel <= 0 is ignored.
* run — TREC run format: ``qid Q0 docid rank score tag``. Ranks are
  re-derived on read by re-sorting on score; scores are written with 17
  significant digits so a write/read round trip is bit-faithful for
  double precision.
"""

from __future__ import annotations

import json
from pathlib import Path

from .model import Corpus, Document, ParseError, Qrels, Query, RunList, ValidationError


def _format_score(score: float) -> str:
    return f"{score:.17g}"


def _iter_jsonl(path: str | Path):
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise ParseError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def read_corpus(path: str | Path) -> Corpus:
    """Read a JSONL corpus, preserving file order. Duplicate ids are rejected."""
    documents = []
    for lineno, record in _iter_jsonl(path):
        if "id" not in record or "text" not in record:
            raise ParseError(f"{path}:{lineno}: missing required field 'id' or 'text'")
        try:
            documents.append(Document(record["id"], record["text"]))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return Corpus(documents)


def read_queries(path: str | Path) -> list[Query]:
    """Read a JSONL query file (same shape as a corpus file)."""
    queries = []
    seen: set[str] = set()
    for lineno, record in _iter_jsonl(path):
        if "id" not in record or "text" not in record:
            raise ParseError(f"{path}:{lineno}: missing required field 'id' or 'text'")
        try:
            query = Query(record["id"], record["text"])
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        if query.id in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate query id {query.id!r}")
        seen.add(query.id)
        queries.append(query)
    return queries


def read_qrels(path: str | Path) -> Qrels:
    """Read TREC qrels. Lines are ``qid 0 docid rel``; rel > 0 means relevant."""
    judgments: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 4:
                raise ParseError(
                    f"{path}:{lineno}: expected 4 fields 'qid 0 docid rel', got {len(fields)}"
                )
            query_id, _, doc_id, rel_text = fields
            try:
                rel = int(rel_text)
            except ValueError as exc:
                raise ParseError(
                    f"{path}:{lineno}: relevance must be an integer, got {rel_text!r}"
                ) from exc
            if rel > 0:
                judgments.setdefault(query_id, set()).add(doc_id)
            else:
                judgments.setdefault(query_id, set())
    return Qrels(judgments)


def read_run(path: str | Path) -> list[RunList]:
    """Read a TREC run file into RunLists, one per query, in first-appearance order.

    Entries are re-sorted by score descending (doc id breaks ties); the rank
    column in the file is ignored. Duplicate (qid, docid) pairs are rejected.
    """
    per_query: dict[str, dict[str, float]] = {}
    tags: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 6:
                raise ParseError(
                    f"{path}:{lineno}: expected 6 fields 'qid Q0 docid rank score tag', "
                    f"got {len(fields)}"
                )
            query_id, _, doc_id, _, score_text, tag = fields
            try:
                score = float(score_text)
            except ValueError as exc:
                raise ParseError(
                    f"{path}:{lineno}: score must be numeric, got {score_text!r}"
                ) from exc
            if score != score or score in (float("inf"), float("-inf")):
                raise ValidationError(f"{path}:{lineno}: non-finite score")
            bucket = per_query.setdefault(query_id, {})
            if doc_id in bucket:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate entry for query {query_id!r}, doc {doc_id!r}"
                )
            bucket[doc_id] = score
            tags.setdefault(query_id, tag)
    return [
        RunList.from_scores(query_id, tags[query_id], scores)
        for query_id, scores in per_query.items()
    ]


def write_run(runs: list[RunList], path: str | Path, tag: str | None = None) -> None:
    """Write RunLists as a TREC run file.

    Ranks are 1-based positions in each run's (already sorted) entry order.
    ``tag`` overrides each run's system_id when given.
    """
    with open(path, "w", encoding="utf-8") as handle:
        for run in runs:
            run_tag = tag if tag is not None else run.system_id
            for rank, (doc_id, score) in enumerate(run.entries, start=1):
                handle.write(
                    f"{run.query_id} Q0 {doc_id} {rank} {_format_score(score)} {run_tag}\n"
                )
