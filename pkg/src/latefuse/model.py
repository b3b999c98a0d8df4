"""Domain types shared by every part of the toolkit.

The central currency is the :class:`RunList`: one system's ranked
``(doc_id, score)`` output for a single query. Its invariants (scores
non-increasing and finite, doc ids distinct) are enforced on every
construction, so downstream code never has to re-check them.

All types are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass


class ParseError(ValueError):
    """A line of an input file could not be parsed (carries file/line context)."""


class ValidationError(ValueError):
    """An invariant on a domain object or input file was violated."""


def check_identifier(value: str, what: str) -> str:
    """Validate an opaque identifier: non-empty text without whitespace."""
    if not isinstance(value, str) or not value:
        raise ValidationError(f"{what} must be a non-empty string, got {value!r}")
    if any(ch.isspace() for ch in value):
        raise ValidationError(f"{what} must not contain whitespace: {value!r}")
    return value


@dataclass(frozen=True)
class Document:
    id: str
    text: str

    def __post_init__(self) -> None:
        check_identifier(self.id, "document id")
        if not isinstance(self.text, str):
            raise ValidationError(f"document {self.id!r}: text must be a string")


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self) -> None:
        check_identifier(self.id, "query id")
        if not isinstance(self.text, str):
            raise ValidationError(f"query {self.id!r}: text must be a string")


class Corpus:
    """Ordered collection of documents with unique ids.

    An empty corpus is legal at construction; indexers reject it separately.
    """

    def __init__(self, documents: Iterable[Document]):
        self._documents = tuple(documents)
        by_id: dict[str, Document] = {}
        for doc in self._documents:
            if doc.id in by_id:
                raise ValidationError(f"duplicate document id: {doc.id!r}")
            by_id[doc.id] = doc
        self._by_id = by_id

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self):
        return iter(self._documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def __getitem__(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(doc.id for doc in self._documents)


class Qrels:
    """Binary relevance judgments: query id -> frozenset of relevant doc ids.

    Membership means rel(q, a) = 1; absence means 0. Graded judgments are
    collapsed to binary upstream, at parse time.
    """

    def __init__(self, judgments: Mapping[str, Iterable[str]]):
        table: dict[str, frozenset[str]] = {}
        for query_id, doc_ids in judgments.items():
            check_identifier(query_id, "query id")
            docs = frozenset(doc_ids)
            for doc_id in docs:
                check_identifier(doc_id, "document id")
            table[query_id] = docs
        self._table = table

    def relevant(self, query_id: str) -> frozenset[str]:
        """Relevant doc ids for a query (empty set when unjudged)."""
        return self._table.get(query_id, frozenset())

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._table

    def __len__(self) -> int:
        return len(self._table)

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(self._table)

    def items(self):
        return self._table.items()


@dataclass(frozen=True)
class RunList:
    """One system's ranked output for one query.

    ``entries`` is a tuple of ``(doc_id, score)`` pairs sorted by
    non-increasing score; doc ids are distinct and scores finite. Use
    :meth:`from_scores` to build one from unordered scores — it applies the
    canonical ordering (score descending, then doc id ascending), which is
    the deterministic tie-break used throughout the toolkit.
    """

    query_id: str
    system_id: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        check_identifier(self.query_id, "query id")
        if not isinstance(self.system_id, str) or not self.system_id:
            raise ValidationError("system id must be a non-empty string")
        seen: set[str] = set()
        prev = math.inf
        for doc_id, score in self.entries:
            check_identifier(doc_id, "document id")
            if doc_id in seen:
                raise ValidationError(
                    f"run for query {self.query_id!r}: duplicate doc id {doc_id!r}"
                )
            seen.add(doc_id)
            if not math.isfinite(score):
                raise ValidationError(
                    f"run for query {self.query_id!r}: non-finite score for {doc_id!r}"
                )
            if score > prev:
                raise ValidationError(
                    f"run for query {self.query_id!r}: scores not non-increasing at {doc_id!r}"
                )
            prev = score

    @classmethod
    def from_scores(
        cls,
        query_id: str,
        system_id: str,
        scores: Mapping[str, float] | Iterable[tuple[str, float]],
        k: int | None = None,
    ) -> "RunList":
        """Build a RunList from per-document scores, optionally truncated to top-k."""
        pairs = scores.items() if isinstance(scores, Mapping) else scores
        ordered = sorted(pairs, key=lambda item: (-item[1], item[0]))
        if k is not None:
            if k < 1:
                raise ValidationError(f"k must be >= 1, got {k}")
            ordered = ordered[:k]
        return cls(query_id, system_id, tuple((d, float(s)) for d, s in ordered))

    def top(self, k: int) -> "RunList":
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        return RunList(self.query_id, self.system_id, self.entries[:k])

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(doc_id for doc_id, _ in self.entries)

    def scores(self) -> dict[str, float]:
        return dict(self.entries)

    def __len__(self) -> int:
        return len(self.entries)
