"""Global alignment of segment sequences with continuous match scores.

Instead of the usual boolean match/mismatch, the substitution score of two
segments is their similarity 1 - d taken from the segment dissimilarity
matrix, so similar but unequal segments still attract each other.  The
bottom-right score of the alignment recurrence measures the congruence of
two messages; normalizing it by the achievable score range and inverting
yields the message dissimilarity in [0, 1] that drives clustering.

Scores are computed with two rolling rows (memory linear in the shorter
sequence).  Producing an actual alignment keeps the full table for the
traceback; ties prefer the diagonal, then a gap in the second sequence,
then a gap in the first, which makes alignments reproducible.

Per-cluster tables are built progressively: members are aligned one by one
against the medoid's current row, ordered by their dissimilarity to the
medoid; gaps inserted into the medoid row propagate to all rows aligned
earlier.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dissim import SegmentDissimilarityMatrix
from .model import AnalysisConfig, Segment
from .segmenter import Segmentation


def _similarity_rows(
    a: list[Segment], b: list[Segment], matrix: SegmentDissimilarityMatrix
) -> list[list[float]]:
    ai = [matrix.index_of(s) for s in a]
    bi = [matrix.index_of(s) for s in b]
    return (1.0 - matrix.matrix[np.ix_(ai, bi)]).tolist()


def _score_linear(sim_rows: list[list[float]], gap: float) -> float:
    """Alignment score using two rolling rows.

    Each cell takes the maximum of (diagonal + similarity, up + gap,
    left + gap), evaluated in that fixed order, so the result is
    bit-identical to a full-table computation.
    """
    n = len(sim_rows)
    m = len(sim_rows[0])
    prev = [j * gap for j in range(m + 1)]
    for i in range(1, n + 1):
        sims = sim_rows[i - 1]
        cur = [i * gap] + [0.0] * m
        for j in range(1, m + 1):
            cur[j] = max(prev[j - 1] + sims[j - 1], prev[j] + gap, cur[j - 1] + gap)
        prev = cur
    return prev[m]


def _score_table(sim_rows: list[list[float]], gap: float) -> list[list[float]]:
    n = len(sim_rows)
    m = len(sim_rows[0])
    table = [[0.0] * (m + 1) for _ in range(n + 1)]
    table[0] = [j * gap for j in range(m + 1)]
    for i in range(1, n + 1):
        sims = sim_rows[i - 1]
        row = table[i]
        above = table[i - 1]
        row[0] = i * gap
        for j in range(1, m + 1):
            row[j] = max(above[j - 1] + sims[j - 1], above[j] + gap, row[j - 1] + gap)
    return table


def _traceback(sim_rows: list[list[float]], gap: float) -> list[tuple[int | None, int | None]]:
    """Optimal alignment as (i, j) index pairs; None marks a gap.

    At equal scores the diagonal wins over a gap in the second sequence,
    which wins over a gap in the first.
    """
    table = _score_table(sim_rows, gap)
    pairs = []
    i, j = len(sim_rows), len(sim_rows[0])
    while i > 0 or j > 0:
        here = table[i][j]
        if i > 0 and j > 0 and here == table[i - 1][j - 1] + sim_rows[i - 1][j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif i > 0 and here == table[i - 1][j] + gap:
            pairs.append((i - 1, None))
            i -= 1
        else:
            pairs.append((None, j - 1))
            j -= 1
    pairs.reverse()
    return pairs


def nw_score(
    a: list[Segment], b: list[Segment], matrix: SegmentDissimilarityMatrix, cfg: AnalysisConfig
) -> float:
    """Global alignment score of two segment sequences."""
    if not a or not b:
        raise ValueError("cannot score an empty segment sequence")
    sim_rows = _similarity_rows(a, b, matrix)
    if len(b) > len(a):
        # transpose so the rolling rows span the shorter sequence; the score
        # is orientation-independent (same candidate values per cell)
        sim_rows = [list(col) for col in zip(*sim_rows)]
    return _score_linear(sim_rows, cfg.gap_penalty)


def nw_align(
    a: list[Segment], b: list[Segment], matrix: SegmentDissimilarityMatrix, cfg: AnalysisConfig
) -> tuple[list[Segment | None], list[Segment | None]]:
    """Optimal global alignment of two segment sequences as gapped rows."""
    if not a or not b:
        raise ValueError("cannot align an empty segment sequence")
    sim_rows = _similarity_rows(a, b, matrix)
    pairs = _traceback(sim_rows, cfg.gap_penalty)
    row_a = [a[i] if i is not None else None for i, _ in pairs]
    row_b = [b[j] if j is not None else None for _, j in pairs]
    return row_a, row_b


def message_dissimilarity(
    a: list[Segment], b: list[Segment], matrix: SegmentDissimilarityMatrix, cfg: AnalysisConfig
) -> float:
    """Normalized, inverted alignment score in [0, 1].

    The score is mapped linearly from [min_len * min(score bounds),
    min_len * max(score bounds)] onto [0, 1] and inverted; identical
    sequences yield exactly 0.
    """
    score = nw_score(a, b, matrix, cfg)
    return _dissimilarity_from_score(score, min(len(a), len(b)), cfg)


def _dissimilarity_from_score(score: float, min_len: int, cfg: AnalysisConfig) -> float:
    bounds = (cfg.gap_penalty, cfg.match_bound, cfg.mismatch_bound)
    t_min = min_len * min(bounds)
    t_max = min_len * max(bounds)
    d = 1.0 - (score - t_min) / (t_max - t_min)
    return min(1.0, max(0.0, d))


def _pair_entry(sim: np.ndarray, ix_i: list[int], ix_j: list[int], cfg: AnalysisConfig) -> float:
    """One message-pair dissimilarity; orientation keeps the rolling rows on
    the shorter sequence (the score is orientation-independent)."""
    if len(ix_i) >= len(ix_j):
        sim_rows = sim[np.ix_(ix_i, ix_j)].tolist()
    else:
        sim_rows = sim[np.ix_(ix_j, ix_i)].tolist()
    score = _score_linear(sim_rows, cfg.gap_penalty)
    return _dissimilarity_from_score(score, min(len(ix_i), len(ix_j)), cfg)


_worker_state: dict = {}


def _init_matrix_worker(sim, indices, cfg):
    _worker_state["sim"] = sim
    _worker_state["indices"] = indices
    _worker_state["cfg"] = cfg


def _matrix_rows(rows: list[int]) -> list[tuple[int, list[float]]]:
    sim = _worker_state["sim"]
    indices = _worker_state["indices"]
    cfg = _worker_state["cfg"]
    n = len(indices)
    return [
        (i, [_pair_entry(sim, indices[i], indices[j], cfg) for j in range(i + 1, n)])
        for i in rows
    ]


def build_message_matrix(
    segmentation: Segmentation,
    matrix: SegmentDissimilarityMatrix,
    cfg: AnalysisConfig,
    workers: int = 1,
) -> np.ndarray:
    """Pairwise message dissimilarity matrix (symmetric, zero diagonal).

    Every entry is an independent computation, so the result does not
    depend on the worker count.
    """
    n = len(segmentation)
    if n < 2:
        raise ValueError("need at least two messages")
    indices = matrix.message_indices(segmentation)
    sim = 1.0 - matrix.matrix

    result = np.zeros((n, n), dtype=np.float64)
    if workers <= 1:
        blocks = [(i, [_pair_entry(sim, indices[i], indices[j], cfg) for j in range(i + 1, n)]) for i in range(n)]
    else:
        # balance work: row i has n-1-i pairs, so deal rows out round-robin
        chunks = [list(range(start, n, workers)) for start in range(workers)]
        blocks = []
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_matrix_worker,
            initargs=(sim, indices, cfg),
        ) as pool:
            for part in pool.map(_matrix_rows, chunks):
                blocks.extend(part)
    for i, row in blocks:
        for k, d in enumerate(row):
            j = i + 1 + k
            result[i, j] = d
            result[j, i] = d
    return result


def medoid(cluster: list[int], matrix: np.ndarray) -> int:
    """The member with the smallest summed dissimilarity to all other
    members; ties go to the lowest message id."""
    if not cluster:
        raise ValueError("empty cluster")
    members = sorted(cluster)
    best = members[0]
    best_sum = None
    for m in members:
        total = float(sum(matrix[m, other] for other in members if other != m))
        if best_sum is None or total < best_sum:
            best = m
            best_sum = total
    return best


@dataclass
class AlignmentTable:
    """Gapped alignment of a cluster's messages.

    All rows have the same number of cells; a cell is a Segment or None for
    a gap.  Removing the gaps from a row reproduces that message's segment
    sequence in order.
    """

    cluster_label: int
    message_ids: list[int]
    rows: list[list[Segment | None]]

    @property
    def n_columns(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def column(self, index: int) -> list[Segment | None]:
        return [row[index] for row in self.rows]

    def validate(self) -> None:
        width = self.n_columns
        for row in self.rows:
            if len(row) != width:
                raise ValueError("ragged alignment table")

    def restricted_to(self, keep: list[int]) -> "AlignmentTable":
        """Sub-table with only the rows of the given message ids."""
        id_to_row = {mid: row for mid, row in zip(self.message_ids, self.rows)}
        return AlignmentTable(
            cluster_label=self.cluster_label,
            message_ids=list(keep),
            rows=[list(id_to_row[mid]) for mid in keep],
        )


def progressive_align_cluster(
    cluster: list[int],
    segmentation: Segmentation,
    matrix: SegmentDissimilarityMatrix,
    message_matrix: np.ndarray,
    cfg: AnalysisConfig,
    cluster_label: int = 0,
) -> AlignmentTable:
    """Align all messages of a cluster around its medoid.

    Rows are ordered medoid first, then ascending by dissimilarity to the
    medoid (ties by id).  Each message is aligned against the medoid's
    current gapped row, where an existing gap cell has similarity 0; a gap
    newly inserted into the medoid row is propagated into every previously
    aligned row.
    """
    if not cluster:
        raise ValueError("empty cluster")
    med = medoid(cluster, message_matrix)
    rest = sorted(
        (m for m in cluster if m != med),
        key=lambda m: (float(message_matrix[med, m]), m),
    )

    sim = 1.0 - matrix.matrix
    ids = [med]
    rows: list[list[Segment | None]] = [list(segmentation[med])]

    for mid in rest:
        segs = segmentation[mid]
        seg_indices = [matrix.index_of(s) for s in segs]
        profile = rows[0]
        # similarity of each profile column vs each new segment; gap cells score 0
        sim_rows = [
            sim[matrix.index_of(cell)][seg_indices].tolist()
            if cell is not None
            else [0.0] * len(segs)
            for cell in profile
        ]
        pairs = _traceback(sim_rows, cfg.gap_penalty)
        new_rows = []
        for row in rows:
            new_rows.append([row[c] if c is not None else None for c, _ in pairs])
        new_rows.append([segs[j] if j is not None else None for _, j in pairs])
        rows = new_rows
        ids.append(mid)

    table = AlignmentTable(cluster_label=cluster_label, message_ids=ids, rows=rows)
    table.validate()
    return table


def degap(row: list[Segment | None]) -> list[Segment]:
    return [cell for cell in row if cell is not None]


def write_alignment_csv(table: AlignmentTable, path) -> None:
    """One row per message: message id, then hex cells or the literal GAP."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for mid, row in zip(table.message_ids, table.rows):
            writer.writerow([mid] + [cell.data.hex() if cell is not None else "GAP" for cell in row])


def write_message_matrix_csv(matrix: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow([repr(float(x)) for x in row])


def read_message_matrix_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [[float(x) for x in row] for row in csv.reader(fh)]
    return np.array(rows, dtype=np.float64)
