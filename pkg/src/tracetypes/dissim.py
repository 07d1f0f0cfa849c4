"""Dissimilarity between segments of possibly different lengths.

The base measure is the Canberra distance between the segments' byte-value
feature vectors.  For unequal lengths, the shorter vector is slid across
the longer one and the best embedding is kept; a length-difference penalty
with a non-linear component then restores the information the embedding
discards.  The resulting dissimilarity lies in [0, 1]: 0 for identical
equal-length segments, 1 for maximally different ones.

Pairs of char segments are systematically closer than their raw byte values
suggest, so their dissimilarity is halved.

A trace-wide matrix memoizes the dissimilarity over the distinct
(byte value, is_char) pairs, since identical segments recur across messages.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import AnalysisConfig, Segment, feature_vector
from .segmenter import Segmentation


def canberra(u: np.ndarray, v: np.ndarray) -> float:
    """Canberra distance between equal-dimension vectors:
    sum of |u_i - v_i| / (|u_i| + |v_i|), where a 0/0 term contributes 0."""
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    num = np.abs(u - v)
    den = np.abs(u) + np.abs(v)
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(np.sum(terms))


def sliding_min_canberra(short: np.ndarray, long: np.ndarray) -> tuple[float, int]:
    """Best embedding of the shorter vector into the longer one.

    Slides a window of the shorter vector's dimension across the longer
    vector and returns the smallest normalized Canberra distance together
    with the smallest offset attaining it.  The value lies in [0, 1].
    """
    ls, lt = len(short), len(long)
    if ls > lt:
        raise ValueError(f"short vector longer than long vector ({ls} > {lt})")
    best_value = None
    best_offset = 0
    for o in range(lt - ls + 1):
        d = canberra(long[o : o + ls], short) / ls
        if best_value is None or d < best_value:
            best_value = d
            best_offset = o
    return best_value, best_offset


def _mixed_value_dissimilarity(shorter: bytes, longer: bytes, penalty_f: float) -> float:
    """Length-generalized dissimilarity on raw byte values.

    For equal lengths this is the dimension-normalized Canberra distance.
    Otherwise, with x the best sliding-embedding distance and r the relative
    length difference, the value is

        (|s|/|t|) * x  +  r  +  (1 - x) * r * (|s|/|t|^2 - F)

    where the first term weights the embedded comparison by how much of the
    longer segment it covers, the second penalizes the relative length
    difference, and the third grows with the absolute number of unmatched
    components, steered by F.
    """
    ls, lt = len(shorter), len(longer)
    fs = feature_vector(shorter)
    ft = feature_vector(longer)
    if ls == lt:
        return canberra(fs, ft) / ls
    x, _ = sliding_min_canberra(fs, ft)
    r = (lt - ls) / lt
    return (ls / lt) * x + r + (1.0 - x) * r * (ls / lt**2 - penalty_f)


def mixed_dissimilarity(a: Segment, b: Segment, cfg: AnalysisConfig) -> float:
    """Dissimilarity between two segments of any lengths, in [0, 1].

    Arguments are canonicalized so the result is exactly symmetric.
    """
    return _mixed_canonical(a.data, b.data, cfg.penalty_f)


def _mixed_canonical(x: bytes, y: bytes, penalty_f: float) -> float:
    if (len(x), x) <= (len(y), y):
        return _mixed_value_dissimilarity(x, y, penalty_f)
    return _mixed_value_dissimilarity(y, x, penalty_f)


def pair_dissimilarity(a: Segment, b: Segment, cfg: AnalysisConfig) -> float:
    """Segment dissimilarity with the char-pair reduction: halved when both
    segments are character sequences."""
    d = mixed_dissimilarity(a, b, cfg)
    if a.is_char and b.is_char:
        return d * 0.5
    return d


SegmentValue = tuple[bytes, bool]  # (byte value, is_char)


@dataclass
class SegmentDissimilarityMatrix:
    """Symmetric dissimilarity matrix over the distinct segment values of a
    trace.  Entries are in [0, 1] with an exactly zero diagonal."""

    values: list[SegmentValue]
    matrix: np.ndarray

    def __post_init__(self):
        self._index = {value: i for i, value in enumerate(self.values)}

    def __len__(self) -> int:
        return len(self.values)

    def index_of(self, segment: Segment) -> int:
        return self._index[segment.value]

    def dissimilarity(self, a: SegmentValue, b: SegmentValue) -> float:
        return float(self.matrix[self._index[a], self._index[b]])

    def similarity(self, a: SegmentValue, b: SegmentValue) -> float:
        return 1.0 - self.dissimilarity(a, b)

    def message_indices(self, segmentation: Segmentation) -> list[list[int]]:
        """Matrix row indices of each message's segment sequence."""
        return [[self._index[seg.value] for seg in segments] for segments in segmentation]


def _block_dissimilarity(
    shorts: np.ndarray, longs: np.ndarray, penalty_f: float, chunk: int = 128
) -> np.ndarray:
    """Mixed-length dissimilarity for all (short, long) vector pairs.

    Vectorized per sliding offset, with the exact operation order of the
    scalar path so every entry is bit-identical to pair_dissimilarity.
    """
    n_short, ls = shorts.shape
    n_long, lt = longs.shape
    out = np.empty((n_short, n_long), dtype=np.float64)
    abs_longs = np.abs(longs)
    for start in range(0, n_short, chunk):
        sub = shorts[start : start + chunk]
        abs_sub = np.abs(sub)[:, None, :]
        best = None
        for o in range(lt - ls + 1):
            window = longs[:, o : o + ls]
            num = np.abs(window[None, :, :] - sub[:, None, :])
            den = abs_longs[:, o : o + ls][None, :, :] + abs_sub
            terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
            dist = terms.sum(axis=2) / ls
            best = dist if best is None else np.minimum(best, dist)
        if ls == lt:
            out[start : start + chunk] = best
        else:
            x = best
            r = (lt - ls) / lt
            out[start : start + chunk] = (ls / lt) * x + r + (1.0 - x) * r * (ls / lt**2 - penalty_f)
    return out


def build_segment_matrix(segmentation: Segmentation, cfg: AnalysisConfig) -> SegmentDissimilarityMatrix:
    """Compute the pairwise dissimilarity of all distinct segment values.

    Values are kept in first-occurrence order (messages by id, segments by
    offset).  Work is batched by (length, length) bucket but each entry is
    an independent computation equal to pair_dissimilarity bit for bit.
    """
    values: list[SegmentValue] = []
    seen = set()
    for segments in segmentation:
        for seg in segments:
            if seg.value not in seen:
                seen.add(seg.value)
                values.append(seg.value)

    n = len(values)
    by_len: dict[int, list[int]] = {}
    for idx, (data, _is_char) in enumerate(values):
        by_len.setdefault(len(data), []).append(idx)
    vectors = {
        length: np.stack([feature_vector(values[i][0]) for i in idxs])
        for length, idxs in by_len.items()
    }

    matrix = np.zeros((n, n), dtype=np.float64)
    lengths = sorted(by_len)
    for pos, ls in enumerate(lengths):
        for lt in lengths[pos:]:
            block = _block_dissimilarity(vectors[ls], vectors[lt], cfg.penalty_f)
            matrix[np.ix_(by_len[ls], by_len[lt])] = block
            matrix[np.ix_(by_len[lt], by_len[ls])] = block.T
    np.fill_diagonal(matrix, 0.0)

    char_mask = np.array([is_char for _, is_char in values], dtype=bool)
    both_char = np.outer(char_mask, char_mask)
    matrix[both_char] *= 0.5
    return SegmentDissimilarityMatrix(values=values, matrix=matrix)


def _header_label(value: SegmentValue) -> str:
    data, is_char = value
    return data.hex() + ("*" if is_char else "")


def _parse_label(label: str) -> SegmentValue:
    if label.endswith("*"):
        return (bytes.fromhex(label[:-1]), True)
    return (bytes.fromhex(label), False)


def write_segment_matrix_csv(matrix: SegmentDissimilarityMatrix, path) -> None:
    """Dump as CSV: header row of hex segment values (char values suffixed
    with '*'), one labelled row per value, floats in round-trip notation."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + [_header_label(v) for v in matrix.values])
        for i, value in enumerate(matrix.values):
            writer.writerow([_header_label(value)] + [repr(float(x)) for x in matrix.matrix[i]])


def read_segment_matrix_csv(path) -> SegmentDissimilarityMatrix:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    values = [_parse_label(label) for label in rows[0][1:]]
    data = np.array([[float(x) for x in row[1:]] for row in rows[1:]], dtype=np.float64)
    return SegmentDissimilarityMatrix(values=values, matrix=data)
