"""Density clustering of the message dissimilarity matrix.

DBSCAN runs on precomputed distances with a small fixed min_samples; the
neighbourhood radius epsilon is derived from the trace itself.  For that,
the sorted k-nearest-neighbour distance profile is scanned for the index of
the sharpest curvature: profiles of well-clustered traces show a knee where
intra-cluster distances give way to inter-cluster ones.  Curvature is taken
on Gaussian-smoothed values and normalized by the smoothed profile value to
undo the bias towards large k; epsilon is then read from the unsmoothed
profile at the winning index.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateTraceError
from .model import AnalysisConfig

NOISE = -1


@dataclass(frozen=True)
class KDistanceProfile:
    """Ascending per-message distances to the k-th nearest neighbour."""

    k: int
    values: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.values) < 0):
            raise ValueError("profile values must be non-decreasing")


@dataclass
class ClusterSet:
    """Cluster labels per message; NOISE (-1) marks unassigned messages."""

    labels: np.ndarray
    epsilon_used: float
    k_chosen: int | None
    noise_count: int

    def clusters(self) -> list[list[int]]:
        """Member ids per cluster, ordered by label."""
        out: dict[int, list[int]] = {}
        for i, label in enumerate(self.labels):
            if label != NOISE:
                out.setdefault(int(label), []).append(i)
        return [out[label] for label in sorted(out)]


def knn_profile(matrix: np.ndarray, k: int) -> KDistanceProfile:
    """Sorted k-th nearest neighbour distances.

    For each message the k-th smallest distance to any other message; the
    self-distance on the diagonal is zero, so the k-th order statistic of
    the full row (0-indexed k) is exactly that.
    """
    n = matrix.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    per_message = np.sort(matrix, axis=1)[:, k]
    return KDistanceProfile(k=k, values=np.sort(per_message))


def gaussian_smooth(values, sigma: float) -> np.ndarray:
    """Convolve with a normalized Gaussian kernel of the given standard
    deviation; kernel radius ceil(4*sigma), boundaries reflected."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty input")
    radius = math.ceil(4.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma**2))
    kernel /= kernel.sum()
    padded = np.pad(x, radius, mode="reflect")
    return np.convolve(padded, kernel, mode="valid")


def autoconfigure_epsilon(matrix: np.ndarray, cfg: AnalysisConfig) -> tuple[float, int, int]:
    """Pick (epsilon, k, index) from the k-distance profiles.

    For k up to 10% of the trace, score every profile index m inside the
    window 2*sigma < m < n - 2*sigma (sigma = ln(n)) by smoothed curvature
    over smoothed value; curvature uses forward differences.  The winning
    index of the winning k yields epsilon as the raw profile value there,
    scaled by the configured epsilon factor.
    """
    n = matrix.shape[0]
    sigma = math.log(n)
    lo = int(2.0 * sigma) + 1
    hi = int(n - 2.0 * sigma)  # exclusive
    if lo >= hi:
        raise ConfigurationError(
            f"trace of {n} messages is too small to derive epsilon from the "
            f"k-distance profile; pass an explicit epsilon"
        )
    k_max = max(1, n // 10)

    sorted_rows = np.sort(matrix, axis=1)  # column k = k-th neighbour distance
    best = None  # (score, k, m)
    raw_profiles: dict[int, np.ndarray] = {}
    for k in range(1, k_max + 1):
        profile = np.sort(sorted_rows[:, k])
        raw_profiles[k] = profile
        smoothed = gaussian_smooth(profile, sigma)
        curvature = np.diff(profile, n=2)
        smoothed_curv = gaussian_smooth(curvature, sigma)
        m_top = min(hi, smoothed_curv.size)
        for m in range(lo, m_top):
            denom = smoothed[m]
            if denom <= 0.0:
                continue
            score = smoothed_curv[m] / denom
            if best is None or score > best[0]:
                best = (score, k, m)
    if best is None:
        raise DegenerateTraceError(
            "all k-distance profiles are flat at zero; the messages are "
            "structurally identical"
        )
    _, k, m = best
    epsilon = float(raw_profiles[k][m]) * cfg.epsilon_factor
    return epsilon, k, m


def dbscan(matrix: np.ndarray, epsilon: float, min_samples: int) -> ClusterSet:
    """Density clustering over precomputed distances.

    A point is core when at least min_samples points (itself included) lie
    within epsilon.  Clusters are grown from core points in ascending id
    order, so labels are deterministic; unreached points stay NOISE.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if min_samples < 2:
        raise ValueError(f"min_samples must be >= 2, got {min_samples}")
    n = matrix.shape[0]
    neighbors = [np.flatnonzero(matrix[i] <= epsilon) for i in range(n)]
    core = np.array([len(nb) >= min_samples for nb in neighbors])

    labels = np.full(n, NOISE, dtype=np.int64)
    cluster_id = 0
    for seed in range(n):
        if labels[seed] != NOISE or not core[seed]:
            continue
        labels[seed] = cluster_id
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            for q in neighbors[p]:
                if labels[q] == NOISE:
                    labels[q] = cluster_id
                    if core[q]:
                        queue.append(q)
        cluster_id += 1

    noise_count = int(np.sum(labels == NOISE))
    return ClusterSet(labels=labels, epsilon_used=epsilon, k_chosen=None, noise_count=noise_count)


def write_clusters_csv(clusterset: ClusterSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["message_id", "label"])
        for i, label in enumerate(clusterset.labels):
            writer.writerow([i, int(label)])


def read_clusters_csv(path) -> list[int]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return [int(label) for _mid, label in rows[1:]]
