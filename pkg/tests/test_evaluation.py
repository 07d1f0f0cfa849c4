import itertools
import json
import random
from math import comb

import pytest

from tracetypes.errors import MissingGroundTruthError
from tracetypes.evaluation import (
    ConfusionCounts,
    build_report,
    confusion_counts,
    precision_recall,
    report_as_dict,
    write_report_csv,
    write_report_json,
)
from tracetypes.model import AnalysisConfig


def bruteforce_counts(clusters, labels):
    """Classify every message pair explicitly."""
    assignment = {}
    for cid, members in enumerate(clusters):
        for m in members:
            assignment[m] = cid
    ids = sorted(assignment)
    tp = fp = tn = fn = 0
    for a, b in itertools.combinations(ids, 2):
        same_cluster = assignment[a] == assignment[b]
        same_type = labels[a] == labels[b]
        if same_cluster and same_type:
            tp += 1
        elif same_cluster:
            fp += 1
        elif same_type:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


class TestConfusionCounts:
    def test_mixed_clusters(self):
        clusters = [[0, 1, 2], [3, 4]]
        labels = {0: "A", 1: "A", 2: "B", 3: "B", 4: "B"}
        counts = confusion_counts(clusters, labels)
        assert (counts.tp, counts.fp, counts.fn, counts.tn) == (2, 2, 2, 4)
        assert counts == bruteforce_counts(clusters, labels)

    def test_perfect_clustering(self):
        clusters = [[0, 1, 2], [3, 4, 5]]
        labels = {i: ("A" if i < 3 else "B") for i in range(6)}
        counts = confusion_counts(clusters, labels)
        assert (counts.tp, counts.fp, counts.fn, counts.tn) == (6, 0, 0, 9)

    def test_single_cluster_single_type(self):
        counts = confusion_counts([[0, 1, 2, 3]], {i: "A" for i in range(4)})
        assert (counts.tp, counts.fp, counts.fn, counts.tn) == (6, 0, 0, 0)

    def test_unlabeled_message_rejected(self):
        with pytest.raises(MissingGroundTruthError):
            confusion_counts([[0, 1]], {0: "A"})

    def test_matches_bruteforce_randomized(self):
        rng = random.Random(321)
        for _ in range(100):
            n = rng.randint(2, 60)
            n_clusters = rng.randint(1, max(1, n // 2))
            n_types = rng.randint(1, 5)
            labels = {i: f"t{rng.randrange(n_types)}" for i in range(n)}
            clusters = [[] for _ in range(n_clusters)]
            for i in range(n):
                clusters[rng.randrange(n_clusters)].append(i)
            clusters = [c for c in clusters if c]
            counts = confusion_counts(clusters, labels)
            assert counts == bruteforce_counts(clusters, labels)
            assert counts.total_pairs == comb(n, 2)
            assert counts.tp + counts.fp == sum(comb(len(c), 2) for c in clusters)

    def test_invariance_under_relabeling(self):
        rng = random.Random(8)
        n = 30
        labels = {i: f"t{rng.randrange(3)}" for i in range(n)}
        clusters = [list(range(0, 10)), list(range(10, 18)), list(range(18, 30))]
        base = confusion_counts(clusters, labels)
        shuffled_clusters = [clusters[2], clusters[0], clusters[1]]
        assert confusion_counts(shuffled_clusters, labels) == base
        permutation = list(range(n))
        rng.shuffle(permutation)
        mapped_clusters = [[permutation[m] for m in c] for c in clusters]
        mapped_labels = {permutation[m]: labels[m] for m in range(n)}
        assert confusion_counts(mapped_clusters, mapped_labels) == base


class TestPrecisionRecall:
    def test_mixed(self):
        p, r = precision_recall(ConfusionCounts(tp=2, fp=2, tn=4, fn=2))
        assert (p, r) == (0.5, 0.5)

    def test_perfect(self):
        p, r = precision_recall(ConfusionCounts(tp=6, fp=0, tn=9, fn=0))
        assert (p, r) == (1.0, 1.0)

    def test_absent_on_zero_denominator(self):
        p, r = precision_recall(ConfusionCounts(tp=0, fp=0, tn=3, fn=0))
        assert p is None
        assert r is None
        p, r = precision_recall(ConfusionCounts(tp=0, fp=0, tn=1, fn=2))
        assert p is None
        assert r == 0.0


class TestReport:
    def _report(self, with_labels=True):
        labels = {0: "A", 1: "A", 2: "B", 3: "B"} if with_labels else None
        return build_report(
            protocol="demo",
            segmenter="fixed4",
            cfg=AnalysisConfig(),
            epsilon=0.25,
            k=2,
            clusters=[[0, 1], [2, 3]],
            noise=0,
            labels=labels,
        )

    def test_schema_with_ground_truth(self, tmp_path):
        report = self._report()
        doc = report_as_dict(report)
        assert doc["protocol"] == "demo"
        assert doc["segmenter"] == "fixed4"
        assert doc["epsilon"] == 0.25
        assert doc["k"] == 2
        assert doc["noise"] == 0
        assert doc["precision"] == 1.0
        assert doc["recall"] == 1.0
        assert doc["clusters"] == [
            {"label": 0, "size": 2, "types": {"A": 2}},
            {"label": 1, "size": 2, "types": {"B": 2}},
        ]
        assert doc["config"]["penalty_f"] == 0.33
        path = tmp_path / "report.json"
        write_report_json(report, path)
        assert json.loads(path.read_text()) == doc

    def test_schema_without_ground_truth(self):
        doc = report_as_dict(self._report(with_labels=False))
        assert "precision" not in doc
        assert "recall" not in doc
        assert doc["clusters"][0]["types"] == {}

    def test_csv_mirror(self, tmp_path):
        path = tmp_path / "report.csv"
        write_report_csv(self._report(), path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "label,size,types"
        assert rows[1] == "0,2,A:2"
        assert rows[2] == "1,2,B:2"

    def test_zero_noise_when_all_clustered(self):
        assert self._report().noise == 0
