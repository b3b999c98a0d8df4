import math

import pytest

from latefuse.model import Corpus, Document, Qrels, Query, RunList, ValidationError


class TestRunList:
    def test_from_scores_sorts_descending_with_doc_id_tiebreak(self):
        run = RunList.from_scores("q1", "sys", {"b": 1.0, "a": 3.0, "c": 3.0})
        assert run.entries == (("a", 3.0), ("c", 3.0), ("b", 1.0))

    def test_rejects_increasing_scores(self):
        with pytest.raises(ValidationError):
            RunList("q1", "sys", (("a", 1.0), ("b", 2.0)))

    def test_rejects_duplicate_doc_ids(self):
        with pytest.raises(ValidationError):
            RunList("q1", "sys", (("a", 2.0), ("a", 1.0)))

    def test_rejects_non_finite_scores(self):
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(ValidationError):
                RunList("q1", "sys", (("a", bad),))

    def test_rejects_whitespace_ids(self):
        with pytest.raises(ValidationError):
            RunList("q 1", "sys", ())
        with pytest.raises(ValidationError):
            RunList("q1", "sys", (("a b", 1.0),))

    def test_top_truncates(self):
        run = RunList.from_scores("q1", "sys", {"a": 3.0, "b": 2.0, "c": 1.0})
        assert run.top(2).doc_ids == ("a", "b")
        with pytest.raises(ValidationError):
            run.top(0)

    def test_empty_run_is_legal(self):
        assert len(RunList("q1", "sys", ())) == 0


class TestCorpusAndQrels:
    def test_corpus_preserves_order_and_rejects_duplicates(self):
        docs = [Document("a1", "x"), Document("a2", "y"), Document("a3", "z")]
        corpus = Corpus(docs)
        assert corpus.doc_ids == ("a1", "a2", "a3")
        with pytest.raises(ValidationError):
            Corpus(docs + [Document("a1", "again")])

    def test_empty_corpus_is_constructible(self):
        assert len(Corpus([])) == 0

    def test_document_requires_valid_id(self):
        with pytest.raises(ValidationError):
            Document("", "text")
        with pytest.raises(ValidationError):
            Document("has space", "text")
        Document("ok", "")  # empty text is legal

    def test_qrels_lookup(self):
        qrels = Qrels({"q1": {"d1", "d2"}})
        assert qrels.relevant("q1") == frozenset({"d1", "d2"})
        assert qrels.relevant("missing") == frozenset()
        assert "q1" in qrels

    def test_query_type(self):
        query = Query("q1", "some text")
        assert query.id == "q1"
        with pytest.raises(ValidationError):
            Query("q 1", "text")
