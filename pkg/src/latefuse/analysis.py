"""Score-distribution analysis: complementarity quadrants, pair sampling,
and histogram/CSV exports.

Two systems' behaviour on the same (query, doc) pairs is summarized by four
regions, judged against each system's global distribution of min-max
normalized scores:

* ``A`` — system 1 scores high (above its third quartile) while system 2
  scores low (below its first quartile);
* ``B`` — the reverse;
* ``C`` — both high; ``D`` — both low.

Pairs between the quartiles on either axis fall outside all four regions
and are left unlabeled. Outputs are plain CSV tables meant for any external
plotting tool; nothing here renders figures.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fusion import ScoreDistribution, normalize
from .model import Qrels, RunList, ValidationError

REGIONS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class PairSample:
    """One (query, doc) pair with per-system normalized scores and its label."""

    query_id: str
    doc_id: str
    scores: tuple[float, ...]
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValidationError(f"pair label must be 0 or 1, got {self.label}")


def quadrant_classify(
    pair: PairSample, dist1: ScoreDistribution, dist2: ScoreDistribution
) -> str | None:
    """Region label for a two-system pair, or None when it falls between
    the quartile thresholds on either axis."""
    if len(pair.scores) != 2:
        raise ValidationError(
            f"quadrant analysis needs exactly 2 system scores, got {len(pair.scores)}"
        )
    s1, s2 = pair.scores
    q1_low, _, q1_high = dist1.quartiles()
    q2_low, _, q2_high = dist2.quartiles()
    high1, low1 = s1 > q1_high, s1 < q1_low
    high2, low2 = s2 > q2_high, s2 < q2_low
    if high1 and low2:
        return "A"
    if low1 and high2:
        return "B"
    if high1 and high2:
        return "C"
    if low1 and low2:
        return "D"
    return None


@dataclass
class ComplementarityReport:
    """Per-region (relevant, non-relevant) counts plus, for the one-sided
    regions, how often the higher-scoring system agreed with the label."""

    counts: dict[str, tuple[int, int]]
    agreement: dict[str, float | None]
    unlabeled: int

    def rows(self) -> list[tuple]:
        out = []
        for region in REGIONS:
            relevant, nonrelevant = self.counts[region]
            out.append((region, relevant, nonrelevant, self.agreement.get(region)))
        return out


def complementarity_report(
    pairs: list[PairSample], dist1: ScoreDistribution, dist2: ScoreDistribution
) -> ComplementarityReport:
    """Count relevant/non-relevant pairs per region.

    In regions A and B exactly one system scores high; that system
    effectively predicts "relevant", so its agreement rate with the label is
    the region's fraction of relevant pairs.
    """
    counts = {region: [0, 0] for region in REGIONS}
    unlabeled = 0
    for pair in pairs:
        region = quadrant_classify(pair, dist1, dist2)
        if region is None:
            unlabeled += 1
        elif pair.label == 1:
            counts[region][0] += 1
        else:
            counts[region][1] += 1
    agreement: dict[str, float | None] = {}
    for region in ("A", "B"):
        relevant, nonrelevant = counts[region]
        total = relevant + nonrelevant
        agreement[region] = relevant / total if total else None
    return ComplementarityReport(
        {region: (c[0], c[1]) for region, c in counts.items()}, agreement, unlabeled
    )


def sample_pairs(
    runs_by_system: list[list[RunList]],
    qrels: Qrels,
    n_pos: int,
    n_neg: int,
    seed: int,
) -> list[PairSample]:
    """Draw a labeled sample of (query, doc) pairs scored by every system.

    Positives come from the qrels; negatives are drawn uniformly from the
    judged queries' non-relevant candidates. Only documents present in every
    system's run for the query are eligible, so each sampled pair carries a
    full score vector. Scores are min-max normalized within each system's
    per-query candidate list. Deterministic for a fixed seed.
    """
    if n_pos < 0 or n_neg < 0:
        raise ValidationError("n_pos and n_neg must be non-negative")
    tables = []
    for runs in runs_by_system:
        tables.append({run.query_id: run for run in runs})
    common_queries = set(tables[0])
    for table in tables[1:]:
        common_queries &= set(table)
    normalized: dict[tuple[int, str], dict[str, float]] = {}
    for system_index, table in enumerate(tables):
        for query_id in common_queries:
            run = table[query_id]
            values = normalize([score for _, score in run.entries], "minmax")
            normalized[(system_index, query_id)] = dict(zip(run.doc_ids, values))
    positives: list[tuple[str, str]] = []
    negatives: list[tuple[str, str]] = []
    for query_id in sorted(common_queries):
        relevant = qrels.relevant(query_id)
        if not relevant:
            continue
        eligible = set(tables[0][query_id].doc_ids)
        for table in tables[1:]:
            eligible &= set(table[query_id].doc_ids)
        for doc_id in sorted(eligible):
            if doc_id in relevant:
                positives.append((query_id, doc_id))
            else:
                negatives.append((query_id, doc_id))
    if n_pos > len(positives):
        raise ValidationError(
            f"requested {n_pos} positive pairs but only {len(positives)} exist"
        )
    if n_neg > len(negatives):
        raise ValidationError(
            f"requested {n_neg} negative pairs but only {len(negatives)} exist"
        )
    rng = random.Random(seed)
    chosen = [(pair, 1) for pair in rng.sample(positives, n_pos)]
    chosen += [(pair, 0) for pair in rng.sample(negatives, n_neg)]
    samples = []
    for (query_id, doc_id), label in chosen:
        scores = tuple(
            normalized[(system_index, query_id)][doc_id]
            for system_index in range(len(tables))
        )
        samples.append(PairSample(query_id, doc_id, scores, label))
    return samples


def export_histograms(dist: ScoreDistribution, bins: int) -> list[tuple[float, float, int]]:
    """Equal-width histogram of the stored sample as (left, right, count)
    rows; counts sum to the sample size."""
    if bins < 1:
        raise ValidationError(f"bins must be >= 1, got {bins}")
    counts, edges = np.histogram(dist.sample, bins=bins)
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(len(counts))
    ]


def write_histogram_csv(dist: ScoreDistribution, bins: int, path: str | Path) -> None:
    rows = export_histograms(dist, bins)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["bin_left", "bin_right", "count"])
        for left, right, count in rows:
            writer.writerow([f"{left:.17g}", f"{right:.17g}", count])


def write_pairs_csv(
    pairs: list[PairSample], system_ids: list[str], path: str | Path
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["query_id", "doc_id", *system_ids, "label"])
        for pair in pairs:
            writer.writerow(
                [
                    pair.query_id,
                    pair.doc_id,
                    *(f"{score:.17g}" for score in pair.scores),
                    pair.label,
                ]
            )


def write_regions_csv(report: ComplementarityReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["region", "relevant", "nonrelevant", "agreement"])
        for region, relevant, nonrelevant, agreement in report.rows():
            writer.writerow(
                [
                    region,
                    relevant,
                    nonrelevant,
                    "" if agreement is None else f"{agreement:.17g}",
                ]
            )
        writer.writerow(["unlabeled", report.unlabeled, "", ""])
