"""Scoring inferred clusters against ground-truth type labels.

Quality is measured over message pairs: a pair clustered together is a true
positive when both messages share a type.  Noise messages are excluded from
the confusion matrix and reported only as a count.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from math import comb

from .errors import MissingGroundTruthError
from .model import AnalysisConfig


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total_pairs(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion_counts(clusters: list[list[int]], labels: dict[int, str]) -> ConfusionCounts:
    """Pairwise confusion counts of a clustering against type labels.

    ``clusters`` holds the non-noise message ids per cluster; every listed
    message must have a label.  Counts follow the pair formulation:
    positives are pairs sharing a cluster, true when they also share a type.
    """
    per_cluster: list[dict[str, int]] = []
    sizes: list[int] = []
    for cluster in clusters:
        counts: dict[str, int] = {}
        for mid in cluster:
            if mid not in labels or labels[mid] is None:
                raise MissingGroundTruthError(f"clustered message {mid} has no type label")
            t = labels[mid]
            counts[t] = counts.get(t, 0) + 1
        per_cluster.append(counts)
        sizes.append(len(cluster))

    tp = sum(comb(c, 2) for counts in per_cluster for c in counts.values())
    fp = sum(comb(s, 2) for s in sizes) - tp

    fn = 0
    cross = 0
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            cross += sizes[i] * sizes[j]
            for t, c in per_cluster[i].items():
                fn += c * per_cluster[j].get(t, 0)
    tn = cross - fn
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def precision_recall(counts: ConfusionCounts) -> tuple[float | None, float | None]:
    """The two pair ratios; None where the denominator is zero."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else None
    return precision, recall


@dataclass
class QualityReport:
    """Everything a run reports: quality metrics when ground truth exists,
    plus the clustering statistics and configuration echo."""

    protocol: str
    segmenter: str
    config: AnalysisConfig
    epsilon: float
    k: int | None
    cluster_sizes: list[int]
    cluster_types: list[dict[str, int]]
    noise: int
    precision: float | None = None
    recall: float | None = None

    @property
    def cluster_count(self) -> int:
        return len(self.cluster_sizes)


def build_report(
    protocol: str,
    segmenter: str,
    cfg: AnalysisConfig,
    epsilon: float,
    k: int | None,
    clusters: list[list[int]],
    noise: int,
    labels: dict[int, str] | None,
) -> QualityReport:
    """Assemble the report; computes precision/recall when labels are given."""
    report = QualityReport(
        protocol=protocol,
        segmenter=segmenter,
        config=cfg,
        epsilon=epsilon,
        k=k,
        cluster_sizes=[len(c) for c in clusters],
        cluster_types=[
            _type_composition(c, labels) if labels is not None else {} for c in clusters
        ],
        noise=noise,
    )
    if labels is not None:
        counts = confusion_counts(clusters, labels)
        report.precision, report.recall = precision_recall(counts)
    return report


def _type_composition(cluster: list[int], labels: dict[int, str]) -> dict[str, int]:
    out: dict[str, int] = {}
    for mid in cluster:
        t = labels.get(mid)
        if t is not None:
            out[t] = out.get(t, 0) + 1
    return out


def report_as_dict(report: QualityReport) -> dict:
    doc = {
        "protocol": report.protocol,
        "segmenter": report.segmenter,
        "config": {
            "penalty_f": report.config.penalty_f,
            "gap_penalty": report.config.gap_penalty,
            "match_bound": report.config.match_bound,
            "mismatch_bound": report.config.mismatch_bound,
            "min_samples": report.config.min_samples,
            "epsilon_factor": report.config.epsilon_factor,
            "char_mean_min": report.config.char_mean_min,
            "char_mean_max": report.config.char_mean_max,
            "char_min_len": report.config.char_min_len,
            "char_nonprintable_ratio": report.config.char_nonprintable_ratio,
            "char_byte_max": report.config.char_byte_max,
            "trace_limit": report.config.trace_limit,
        },
        "epsilon": report.epsilon,
        "k": report.k,
        "clusters": [
            {"label": i, "size": size, "types": types}
            for i, (size, types) in enumerate(zip(report.cluster_sizes, report.cluster_types))
        ],
        "noise": report.noise,
    }
    if report.precision is not None:
        doc["precision"] = report.precision
    if report.recall is not None:
        doc["recall"] = report.recall
    return doc


def write_report_json(report: QualityReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_as_dict(report), fh, indent=1)
        fh.write("\n")


def write_report_csv(report: QualityReport, path) -> None:
    """CSV mirror: one row per cluster with its type composition."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "size", "types"])
        for i, (size, types) in enumerate(zip(report.cluster_sizes, report.cluster_types)):
            joined = ";".join(f"{t}:{c}" for t, c in sorted(types.items()))
            writer.writerow([i, size, joined])
