import csv
import math
import random

import numpy as np
import pytest

from latefuse.analysis import (
    PairSample,
    complementarity_report,
    export_histograms,
    quadrant_classify,
    sample_pairs,
    write_histogram_csv,
    write_pairs_csv,
    write_regions_csv,
)
from latefuse.fusion import ScoreDistribution
from latefuse.model import Qrels, RunList, ValidationError


def uniform_dist(system_id="s"):
    # quartiles at 0.25 / 0.5 / 0.75
    return ScoreDistribution(system_id, [i / 1000 for i in range(1001)])


def pair(s1, s2, label=1):
    return PairSample("q1", "d1", (s1, s2), label)


class TestQuadrantClassify:
    def test_high_low_is_a(self):
        assert quadrant_classify(pair(0.99, 0.01), uniform_dist(), uniform_dist()) == "A"

    def test_low_high_is_b(self):
        assert quadrant_classify(pair(0.01, 0.99), uniform_dist(), uniform_dist()) == "B"

    def test_both_high_is_c(self):
        assert quadrant_classify(pair(0.99, 0.99), uniform_dist(), uniform_dist()) == "C"

    def test_both_low_is_d(self):
        assert quadrant_classify(pair(0.01, 0.01), uniform_dist(), uniform_dist()) == "D"

    def test_between_quartiles_is_unlabeled(self):
        assert quadrant_classify(pair(0.5, 0.5), uniform_dist(), uniform_dist()) is None
        assert quadrant_classify(pair(0.99, 0.5), uniform_dist(), uniform_dist()) is None

    def test_labels_exhaustive_and_exclusive(self):
        rng = random.Random(9)
        d1, d2 = uniform_dist("a"), uniform_dist("b")
        for _ in range(500):
            sample = pair(rng.random(), rng.random())
            label = quadrant_classify(sample, d1, d2)
            assert label in ("A", "B", "C", "D", None)
            s1, s2 = sample.scores
            if label == "A":
                assert s1 > 0.75 and s2 < 0.25
            elif label == "B":
                assert s1 < 0.25 and s2 > 0.75
            elif label == "C":
                assert s1 > 0.75 and s2 > 0.75
            elif label == "D":
                assert s1 < 0.25 and s2 < 0.25

    def test_needs_exactly_two_scores(self):
        with pytest.raises(ValidationError):
            quadrant_classify(
                PairSample("q1", "d1", (0.5,), 1), uniform_dist(), uniform_dist()
            )


class TestComplementarityReport:
    def test_planted_always_right_in_a(self):
        pairs = [pair(0.99, 0.01, label=1) for _ in range(50)]
        report = complementarity_report(pairs, uniform_dist(), uniform_dist())
        assert report.counts["A"] == (50, 0)
        assert report.agreement["A"] == 1.0

    def test_all_c_with_positive_labels(self):
        pairs = [pair(0.99, 0.98, label=1) for _ in range(30)]
        report = complementarity_report(pairs, uniform_dist(), uniform_dist())
        assert report.counts["C"] == (30, 0)
        assert report.counts["A"] == (0, 0)

    def test_symmetric_random_labels_agree_at_chance(self):
        # with coin-flip labels the agreement in A is binomial(n, 0.5);
        # a 99% interval at n=1000 is 0.5 +/- 2.58 * 0.5 / sqrt(n)
        rng = random.Random(12)
        n = 1000
        pairs = [pair(0.99, 0.01, label=rng.randint(0, 1)) for _ in range(n)]
        report = complementarity_report(pairs, uniform_dist(), uniform_dist())
        margin = 2.58 * 0.5 / math.sqrt(n)
        assert abs(report.agreement["A"] - 0.5) < margin

    def test_unlabeled_counted(self):
        pairs = [pair(0.5, 0.5), pair(0.99, 0.01)]
        report = complementarity_report(pairs, uniform_dist(), uniform_dist())
        assert report.unlabeled == 1


def make_runs(system_id, per_query_scores):
    return [
        RunList.from_scores(query_id, system_id, scores)
        for query_id, scores in per_query_scores.items()
    ]


class TestSamplePairs:
    def setup_method(self):
        rng = random.Random(5)
        docs = [f"d{i:02d}" for i in range(30)]
        self.qrels = Qrels({f"q{i}": {f"d{i:02d}", f"d{i + 10:02d}"} for i in range(5)})
        per_query_a = {
            f"q{i}": {d: rng.uniform(0, 1) for d in docs} for i in range(5)
        }
        per_query_b = {
            f"q{i}": {d: rng.uniform(0, 1) for d in docs} for i in range(5)
        }
        self.runs = [make_runs("a", per_query_a), make_runs("b", per_query_b)]

    def test_deterministic_under_fixed_seed(self):
        first = sample_pairs(self.runs, self.qrels, 10, 10, seed=7)
        second = sample_pairs(self.runs, self.qrels, 10, 10, seed=7)
        assert first == second

    def test_different_seed_changes_sample(self):
        first = sample_pairs(self.runs, self.qrels, 10, 10, seed=7)
        second = sample_pairs(self.runs, self.qrels, 10, 10, seed=8)
        assert first != second

    def test_requested_balance_is_exact(self):
        pairs = sample_pairs(self.runs, self.qrels, 6, 9, seed=1)
        assert sum(1 for p in pairs if p.label == 1) == 6
        assert sum(1 for p in pairs if p.label == 0) == 9

    def test_insufficient_positives_rejected(self):
        with pytest.raises(ValidationError, match="positive"):
            sample_pairs(self.runs, self.qrels, 1000, 1, seed=1)

    def test_scores_are_minmax_normalized(self):
        pairs = sample_pairs(self.runs, self.qrels, 10, 10, seed=3)
        for sample in pairs:
            assert all(0.0 <= s <= 1.0 for s in sample.scores)

    def test_labels_match_qrels(self):
        pairs = sample_pairs(self.runs, self.qrels, 10, 10, seed=3)
        for sample in pairs:
            expected = 1 if sample.doc_id in self.qrels.relevant(sample.query_id) else 0
            assert sample.label == expected


class TestHistograms:
    def test_uniform_values_spread_evenly(self):
        values = [(i + 0.5) / 100 for i in range(100)]
        rows = export_histograms(ScoreDistribution("s", values), bins=10)
        assert len(rows) == 10
        assert all(count == 10 for _, _, count in rows)

    def test_single_value(self):
        rows = export_histograms(ScoreDistribution("s", [2.5]), bins=5)
        assert sum(count for _, _, count in rows) == 1
        assert sum(1 for _, _, count in rows if count) == 1

    def test_mass_conservation(self):
        rng = np.random.default_rng(3)
        for size in (1, 17, 400):
            dist = ScoreDistribution("s", rng.normal(size=size))
            for bins in (1, 7, 32):
                rows = export_histograms(dist, bins)
                assert sum(count for _, _, count in rows) == size

    def test_bad_bin_count(self):
        with pytest.raises(ValidationError):
            export_histograms(ScoreDistribution("s", [1.0]), bins=0)


class TestCsvWriters:
    def test_histogram_csv(self, tmp_path):
        path = tmp_path / "hist.csv"
        write_histogram_csv(ScoreDistribution("s", [0.1, 0.4, 0.9]), 3, path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["bin_left", "bin_right", "count"]
        assert sum(int(r[2]) for r in rows[1:]) == 3

    def test_pairs_csv(self, tmp_path):
        path = tmp_path / "pairs.csv"
        write_pairs_csv([pair(0.2, 0.8, label=1)], ["sys1", "sys2"], path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["query_id", "doc_id", "sys1", "sys2", "label"]
        assert rows[1][-1] == "1"

    def test_regions_csv(self, tmp_path):
        report = complementarity_report(
            [pair(0.99, 0.01), pair(0.5, 0.5)], uniform_dist(), uniform_dist()
        )
        path = tmp_path / "regions.csv"
        write_regions_csv(report, path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["region", "relevant", "nonrelevant", "agreement"]
        regions = {row[0] for row in rows[1:]}
        assert {"A", "B", "C", "D", "unlabeled"} <= regions
