import json

import numpy as np
import pytest

from latefuse.model import ParseError, ValidationError
from latefuse.vectors import (
    FlatDenseIndex,
    MultiVectorStore,
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


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")


class TestIngestDense:
    def test_two_vectors(self, tmp_path):
        path = tmp_path / "v.jsonl"
        write_jsonl(
            path,
            [
                {"id": "d1", "vector": [1.0, 0.0, 0.0, 0.0]},
                {"id": "d2", "vector": [0.0, 1.0, 0.0, 0.0]},
            ],
        )
        index = ingest_dense(path)
        assert index.dim == 4
        assert len(index) == 2

    def test_dimension_mismatch_names_offender(self, tmp_path):
        path = tmp_path / "v.jsonl"
        write_jsonl(
            path,
            [{"id": "d1", "vector": [1.0] * 4}, {"id": "bad", "vector": [1.0] * 5}],
        )
        with pytest.raises(ValidationError, match="bad"):
            ingest_dense(path)

    def test_nan_rejected(self, tmp_path):
        path = tmp_path / "v.jsonl"
        write_jsonl(path, [{"id": "d1", "vector": [1.0, float("nan")]}])
        with pytest.raises(ValidationError, match="NaN"):
            ingest_dense(path)

    def test_missing_vector_field(self, tmp_path):
        path = tmp_path / "v.jsonl"
        write_jsonl(path, [{"id": "d1"}])
        with pytest.raises(ParseError):
            ingest_dense(path)

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        records = [
            {"id": f"d{i}", "vector": [float(v) for v in rng.normal(size=6)]}
            for i in range(10)
        ]
        src = tmp_path / "in.jsonl"
        write_jsonl(src, records)
        index = ingest_dense(src)
        out = tmp_path / "out.jsonl"
        dump_dense(index, out)
        reread = ingest_dense(out)
        np.testing.assert_allclose(reread.matrix, index.matrix, rtol=0, atol=1e-9)
        assert reread.ids == index.ids

    def test_normalize_produces_unit_rows(self, tmp_path):
        path = tmp_path / "v.jsonl"
        write_jsonl(path, [{"id": "d1", "vector": [3.0, 4.0]}])
        index = ingest_dense(path, normalize=True)
        np.testing.assert_allclose(np.linalg.norm(index.matrix, axis=1), 1.0, atol=1e-6)

    def test_normalize_rejects_zero_vector(self, tmp_path):
        path = tmp_path / "v.jsonl"
        write_jsonl(path, [{"id": "d1", "vector": [0.0, 0.0]}])
        with pytest.raises(ValidationError, match="zero"):
            ingest_dense(path, normalize=True)


class TestBinaryFormat:
    def test_round_trip_at_float32_precision(self, tmp_path):
        rng = np.random.default_rng(6)
        index = FlatDenseIndex([f"d{i}" for i in range(7)], rng.normal(size=(7, 5)))
        path = tmp_path / "m.fbvx"
        dump_dense_binary(index, path)
        loaded = load_dense_binary(path)
        assert loaded.ids == index.ids
        np.testing.assert_allclose(loaded.matrix, index.matrix, rtol=1e-6, atol=1e-6)

    def test_header_layout(self, tmp_path):
        index = FlatDenseIndex(["d0"], np.zeros((1, 3)))
        path = tmp_path / "m.fbvx"
        dump_dense_binary(index, path)
        raw = path.read_bytes()
        assert raw[:4] == b"FBVX"
        assert len(raw) == 16 + 3 * 4

    def test_misaligned_ids_rejected(self, tmp_path):
        index = FlatDenseIndex(["d0", "d1"], np.zeros((2, 3)))
        path = tmp_path / "m.fbvx"
        dump_dense_binary(index, path)
        (tmp_path / "m.fbvx.ids").write_text("d0\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="misaligned"):
            load_dense_binary(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.fbvx"
        path.write_bytes(b"XXXX" + b"\x00" * 12)
        (tmp_path / "m.fbvx.ids").write_text("", encoding="utf-8")
        with pytest.raises(ValidationError, match="magic"):
            load_dense_binary(path)

    def test_ingest_dispatches_on_extension(self, tmp_path):
        index = FlatDenseIndex(["d0"], np.ones((1, 2)))
        path = tmp_path / "m.fbvx"
        dump_dense_binary(index, path)
        assert ingest_dense(path).ids == ["d0"]


class TestDenseSearch:
    def test_identical_unit_vector_scores_one(self):
        v = np.array([0.6, 0.8])
        index = FlatDenseIndex(["d1", "d2"], np.vstack([v, [-0.8, 0.6]]))
        run = dense_search(index, v, k=2, query_id="q1")
        assert run.doc_ids[0] == "d1"
        assert run.entries[0][1] == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_query_scores_all_zero(self):
        index = FlatDenseIndex(["d1", "d2"], np.array([[1.0, 0.0], [2.0, 0.0]]))
        run = dense_search(index, [0.0, 1.0], k=2)
        assert all(score == 0.0 for _, score in run.entries)

    def test_matches_all_pairs_oracle(self):
        rng = np.random.default_rng(42)
        matrix = rng.normal(size=(50, 8))
        matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
        index = FlatDenseIndex([f"d{i:02d}" for i in range(50)], matrix)
        for trial in range(10):
            query = rng.normal(size=8)
            query /= np.linalg.norm(query)
            run = dense_search(index, query, k=50)
            oracle = sorted(
                ((f"d{i:02d}", float(np.dot(matrix[i], query))) for i in range(50)),
                key=lambda item: (-item[1], item[0]),
            )
            assert run.doc_ids == tuple(doc_id for doc_id, _ in oracle)
            np.testing.assert_allclose(
                [s for _, s in run.entries], [s for _, s in oracle], atol=1e-9
            )

    def test_dimension_mismatch(self):
        index = FlatDenseIndex(["d1"], np.zeros((1, 4)))
        with pytest.raises(ValidationError, match="dimension"):
            dense_search(index, [1.0, 2.0], k=1)

    def test_appending_zero_score_documents_keeps_order(self):
        rng = np.random.default_rng(3)
        base = rng.normal(size=(10, 4))
        query = rng.normal(size=4)
        small = FlatDenseIndex([f"d{i}" for i in range(10)], base)
        padded = FlatDenseIndex(
            [f"d{i}" for i in range(10)] + ["zpad1", "zpad2"],
            np.vstack([base, np.zeros((2, 4))]),
        )
        order_small = dense_search(small, query, k=10).doc_ids
        order_padded = [
            d for d in dense_search(padded, query, k=12).doc_ids if not d.startswith("zpad")
        ]
        assert list(order_small) == order_padded

    def test_cosine_scores_bounded(self):
        rng = np.random.default_rng(8)
        matrix = rng.normal(size=(30, 6))
        matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
        index = FlatDenseIndex([f"d{i}" for i in range(30)], matrix, normalized=True)
        for _ in range(20):
            query = rng.normal(size=6)
            query /= np.linalg.norm(query)
            run = dense_search(index, query, k=30)
            assert all(-1 - 1e-9 <= score <= 1 + 1e-9 for _, score in run.entries)


class TestSparse:
    def test_basic_example(self, tmp_path):
        path = tmp_path / "s.jsonl"
        write_jsonl(
            path,
            [{"id": "d1", "weights": {"x": 2.0}}, {"id": "d2", "weights": {"y": 3.0}}],
        )
        index = ingest_sparse(path)
        run = sparse_search(index, {"x": 1.0}, k=10, query_id="q1")
        scores = dict(run.entries)
        assert scores["d1"] == 2.0
        assert scores.get("d2", 0.0) == 0.0

    def test_empty_query_gives_empty_run(self, tmp_path):
        path = tmp_path / "s.jsonl"
        write_jsonl(path, [{"id": "d1", "weights": {"x": 2.0}}])
        index = ingest_sparse(path)
        assert len(sparse_search(index, {}, k=10)) == 0

    def test_negative_weight_rejected(self, tmp_path):
        path = tmp_path / "s.jsonl"
        write_jsonl(path, [{"id": "d1", "weights": {"x": -1.0}}])
        with pytest.raises(ValidationError, match="negative"):
            ingest_sparse(path)

    def test_zero_weights_dropped(self, tmp_path):
        path = tmp_path / "s.jsonl"
        write_jsonl(path, [{"id": "d1", "weights": {"x": 0.0, "y": 1.5}}])
        index = ingest_sparse(path)
        assert index.nonzero_counts["d1"] == 1

    def test_equals_dense_expansion_oracle(self, tmp_path):
        rng = np.random.default_rng(77)
        vocab = [f"t{i:03d}" for i in range(100)]
        docs = []
        for di in range(40):
            terms = rng.choice(vocab, size=rng.integers(1, 30), replace=False)
            docs.append(
                {
                    "id": f"d{di:02d}",
                    "weights": {t: float(rng.uniform(0.01, 5)) for t in terms},
                }
            )
        path = tmp_path / "s.jsonl"
        write_jsonl(path, docs)
        index = ingest_sparse(path)
        term_pos = {t: i for i, t in enumerate(vocab)}

        def expand(weights):
            v = np.zeros(len(vocab))
            for t, w in weights.items():
                v[term_pos[t]] = w
            return v

        doc_matrix = np.vstack([expand(d["weights"]) for d in docs])
        for _ in range(10):
            terms = rng.choice(vocab, size=rng.integers(1, 20), replace=False)
            query = {t: float(rng.uniform(0.01, 3)) for t in terms}
            run = sparse_search(index, query, k=40)
            expected = doc_matrix @ expand(query)
            got = dict(run.entries)
            for di in range(40):
                assert got[f"d{di:02d}"] == pytest.approx(expected[di], rel=1e-9, abs=1e-12)


class TestMaxSim:
    def test_single_matching_token(self):
        token = np.array([[0.0, 1.0, 0.0]])
        assert maxsim_score(token, token) == pytest.approx(1.0, abs=1e-12)

    def test_singleton_document_max(self):
        q = np.array([[1.0, 0.0], [0.5, 0.5]])
        d = np.array([[0.25, 0.75]])
        expected = float(q[0] @ d[0] + q[1] @ d[0])
        assert maxsim_score(q, d) == pytest.approx(expected, abs=1e-12)

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(9)
        q = rng.normal(size=(5, 8))
        d = rng.normal(size=(7, 8))
        total = 0.0
        for i in range(5):
            best = -np.inf
            for j in range(7):
                dot = 0.0
                for axis in range(8):
                    dot += q[i, axis] * d[j, axis]
                best = max(best, dot)
            total += best
        assert maxsim_score(q, d) == pytest.approx(total, rel=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="dimension"):
            maxsim_score(np.zeros((1, 3)), np.zeros((1, 4)))

    def test_invariant_under_token_permutations(self):
        rng = np.random.default_rng(10)
        q = rng.normal(size=(6, 4))
        d = rng.normal(size=(9, 4))
        base = maxsim_score(q, d)
        for _ in range(5):
            qp = q[rng.permutation(6)]
            dp = d[rng.permutation(9)]
            assert maxsim_score(qp, dp) == pytest.approx(base, rel=1e-12)


class TestMultiVector:
    def test_ingest_and_single_doc(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_jsonl(path, [{"id": "d1", "tokens": [[1.0, 0.0], [0.0, 1.0]]}])
        store = ingest_multivector(path)
        query = np.array([[1.0, 0.0]])
        run = multivector_search(store, query, k=5, query_id="q1")
        assert run.entries == (("d1", pytest.approx(1.0)),)

    def test_empty_token_matrix_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_jsonl(path, [{"id": "d1", "tokens": []}])
        with pytest.raises(ValidationError, match=">= 1 row"):
            ingest_multivector(path)

    def test_ragged_token_rows_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_jsonl(path, [{"id": "d1", "tokens": [[1.0, 2.0], [3.0]]}])
        with pytest.raises(ValidationError, match="unequal"):
            ingest_multivector(path)

    def test_top_k_of_brute_force(self):
        rng = np.random.default_rng(12)
        ids = [f"d{i}" for i in range(10)]
        matrices = [rng.normal(size=(rng.integers(1, 6), 4)) for _ in range(10)]
        store = MultiVectorStore(ids, matrices)
        query = rng.normal(size=(3, 4))
        run = multivector_search(store, query, k=3)
        brute = sorted(
            ((doc_id, maxsim_score(query, m)) for doc_id, m in zip(ids, matrices)),
            key=lambda item: (-item[1], item[0]),
        )
        assert run.doc_ids == tuple(doc_id for doc_id, _ in brute[:3])

    def test_permuting_document_rows_keeps_score(self):
        rng = np.random.default_rng(13)
        matrix = rng.normal(size=(5, 4))
        store = MultiVectorStore(["d1"], [matrix])
        permuted = MultiVectorStore(["d1"], [matrix[rng.permutation(5)]])
        query = rng.normal(size=(2, 4))
        assert (
            multivector_search(store, query, k=1).entries
            == multivector_search(permuted, query, k=1).entries
        )
