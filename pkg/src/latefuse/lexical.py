"""Tokenization, inverted-index construction, and BM25 scoring.

Scoring notes:

* The inverse document frequency is the natural logarithm
  ``ln((N - df + 0.5) / (df + 0.5))`` and is deliberately NOT clamped at
  zero: a term occurring in more than about half the corpus contributes
  negatively. This keeps the implemented formula exact rather than adopting
  Lucene-style smoothing; callers who want non-negative scores should prune
  high-df query terms themselves.
* Query terms form a multiset: a term occurring twice in the query
  contributes twice.
* Every indexed document receives a score (documents sharing no query term
  score exactly 0), so a search with k = corpus size returns the complete
  ordering, identical to brute-force scoring of each document.

Binary index format (all integers little-endian, varints are unsigned
LEB128):

====================  =======================================================
header                magic ``LXIX`` (4 bytes), version u32 (=1),
                      corpus_size u64, avg_doc_len f64
document table        corpus_size records, in corpus order:
                      varint byte-length + UTF-8 doc id, varint token count
term dictionary       term count u64, then per term in lexicographic order:
                      varint byte-length + UTF-8 term, varint postings
                      length, postings as (varint doc-index delta,
                      varint term frequency) with doc indexes ascending
                      and the first delta equal to the absolute index
====================  =======================================================
"""

from __future__ import annotations

import io as _io
import math
import re
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .model import Corpus, Query, RunList, ValidationError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_MAGIC = b"LXIX"
_VERSION = 1


def tokenize(text: str) -> list[str]:
    """Lowercased maximal runs of unicode letters/digits, in text order.

    No stemming, no stopword removal; diacritics are preserved. Apostrophes
    and all other punctuation split tokens.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if not (self.k1 >= 0 and math.isfinite(self.k1)):
            raise ValidationError(f"k1 must be a finite non-negative real, got {self.k1}")
        if not (0.0 <= self.b <= 1.0):
            raise ValidationError(f"b must lie in [0, 1], got {self.b}")


class LexicalIndex:
    """Inverted index with the corpus statistics BM25 needs.

    ``postings`` maps term -> list of (doc_id, term frequency) with documents
    in corpus order; ``doc_lengths`` maps doc_id -> token count. Immutable
    after construction; concurrent searches are safe.
    """

    def __init__(
        self,
        postings: dict[str, list[tuple[str, int]]],
        doc_lengths: dict[str, int],
        avg_doc_len: float,
        corpus_size: int,
    ):
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.avg_doc_len = avg_doc_len
        self.corpus_size = corpus_size

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return tuple(self.postings)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_lengths

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LexicalIndex):
            return NotImplemented
        return (
            self.postings == other.postings
            and self.doc_lengths == other.doc_lengths
            and self.avg_doc_len == other.avg_doc_len
            and self.corpus_size == other.corpus_size
        )


def build_lexical_index(corpus: Corpus) -> LexicalIndex:
    """Tokenize a corpus and build the inverted index. Rejects empty corpora."""
    if len(corpus) == 0:
        raise ValidationError("cannot index an empty corpus")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in corpus:
        terms = tokenize(doc.text)
        doc_lengths[doc.id] = len(terms)
        for term, tf in sorted(Counter(terms).items()):
            postings.setdefault(term, []).append((doc.id, tf))
    avg_doc_len = sum(doc_lengths.values()) / len(doc_lengths)
    return LexicalIndex(postings, doc_lengths, avg_doc_len, len(corpus))


def bm25_term_weight(
    tf: int,
    df: int,
    corpus_size: int,
    doc_len: int,
    avg_doc_len: float,
    params: Bm25Params,
) -> float:
    """Contribution of a single query-term occurrence to a document's score."""
    if tf == 0:
        return 0.0
    idf = math.log((corpus_size - df + 0.5) / (df + 0.5))
    if avg_doc_len > 0:
        length_norm = 1.0 - params.b + params.b * doc_len / avg_doc_len
    else:
        length_norm = 1.0 - params.b
    return idf * tf * (params.k1 + 1.0) / (tf + params.k1 * length_norm)


def bm25_score(
    index: LexicalIndex,
    params: Bm25Params,
    query_terms: list[str],
    doc_id: str,
    corpus_size: int | None = None,
    avg_doc_len: float | None = None,
) -> float:
    """Score one document against a query term multiset.

    ``corpus_size`` and ``avg_doc_len`` default to the index's values; pinning
    them lets callers score against frozen collection statistics (scores are
    then unaffected by documents added since).
    """
    if doc_id not in index.doc_lengths:
        raise ValidationError(f"unknown document id: {doc_id!r}")
    n = index.corpus_size if corpus_size is None else corpus_size
    avg_len = index.avg_doc_len if avg_doc_len is None else avg_doc_len
    doc_len = index.doc_lengths[doc_id]
    score = 0.0
    for term, query_tf in Counter(query_terms).items():
        plist = index.postings.get(term)
        if not plist:
            continue
        tf = 0
        for posting_doc, posting_tf in plist:
            if posting_doc == doc_id:
                tf = posting_tf
                break
        if tf == 0:
            continue
        score += query_tf * bm25_term_weight(tf, len(plist), n, doc_len, avg_len, params)
    return score


def bm25_search(
    index: LexicalIndex,
    params: Bm25Params,
    query: Query,
    k: int,
    system_id: str = "bm25",
) -> RunList:
    """Rank the whole corpus for a query and return the top-k.

    Term-at-a-time accumulation over postings; unmatched documents keep
    score 0. Ties are broken by ascending doc id.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    scores = dict.fromkeys(index.doc_lengths, 0.0)
    for term, query_tf in Counter(tokenize(query.text)).items():
        plist = index.postings.get(term)
        if not plist:
            continue
        df = len(plist)
        for doc_id, tf in plist:
            scores[doc_id] += query_tf * bm25_term_weight(
                tf, df, index.corpus_size, index.doc_lengths[doc_id], index.avg_doc_len, params
            )
    return RunList.from_scores(query.id, system_id, scores, k=k)


# --- binary serialization ---------------------------------------------------


def _write_uvarint(buffer: _io.BytesIO, value: int) -> None:
    if value < 0:
        raise ValueError("varints are unsigned")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            buffer.write(bytes((byte | 0x80,)))
        else:
            buffer.write(bytes((byte,)))
            return


def _read_uvarint(view: memoryview, offset: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if offset >= len(view):
            raise ValidationError("truncated index file: unterminated varint")
        byte = view[offset]
        offset += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, offset
        shift += 7


def save_lexical_index(index: LexicalIndex, path: str | Path) -> None:
    """Serialize the index to the binary format described in the module docstring."""
    buffer = _io.BytesIO()
    buffer.write(_MAGIC)
    buffer.write(struct.pack("<IQd", _VERSION, index.corpus_size, index.avg_doc_len))
    doc_order = list(index.doc_lengths)
    doc_pos = {doc_id: i for i, doc_id in enumerate(doc_order)}
    for doc_id in doc_order:
        encoded = doc_id.encode("utf-8")
        _write_uvarint(buffer, len(encoded))
        buffer.write(encoded)
        _write_uvarint(buffer, index.doc_lengths[doc_id])
    buffer.write(struct.pack("<Q", len(index.postings)))
    for term in sorted(index.postings):
        encoded = term.encode("utf-8")
        _write_uvarint(buffer, len(encoded))
        buffer.write(encoded)
        plist = sorted(index.postings[term], key=lambda p: doc_pos[p[0]])
        _write_uvarint(buffer, len(plist))
        previous = 0
        for doc_id, tf in plist:
            position = doc_pos[doc_id]
            _write_uvarint(buffer, position - previous)
            _write_uvarint(buffer, tf)
            previous = position
    Path(path).write_bytes(buffer.getvalue())


def load_lexical_index(path: str | Path) -> LexicalIndex:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValidationError(f"{path}: not a lexical index file (bad magic)")
    version, corpus_size, avg_doc_len = struct.unpack_from("<IQd", data, 4)
    if version != _VERSION:
        raise ValidationError(f"{path}: unsupported index version {version}")
    view = memoryview(data)
    offset = 4 + struct.calcsize("<IQd")
    doc_order: list[str] = []
    doc_lengths: dict[str, int] = {}
    for _ in range(corpus_size):
        id_len, offset = _read_uvarint(view, offset)
        doc_id = bytes(view[offset : offset + id_len]).decode("utf-8")
        offset += id_len
        length, offset = _read_uvarint(view, offset)
        doc_order.append(doc_id)
        doc_lengths[doc_id] = length
    (term_count,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    postings: dict[str, list[tuple[str, int]]] = {}
    for _ in range(term_count):
        term_len, offset = _read_uvarint(view, offset)
        term = bytes(view[offset : offset + term_len]).decode("utf-8")
        offset += term_len
        n_postings, offset = _read_uvarint(view, offset)
        plist: list[tuple[str, int]] = []
        position = 0
        for i in range(n_postings):
            delta, offset = _read_uvarint(view, offset)
            position += delta
            tf, offset = _read_uvarint(view, offset)
            plist.append((doc_order[position], tf))
        postings[term] = plist
    if offset != len(data):
        raise ValidationError(f"{path}: trailing bytes after index payload")
    return LexicalIndex(postings, doc_lengths, avg_doc_len, corpus_size)
