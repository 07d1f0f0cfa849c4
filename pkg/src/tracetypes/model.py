"""Core domain types: messages, segments, feature vectors, and the analysis
configuration.

A message is the raw byte payload of one captured datagram.  A segment is a
contiguous slice of a message that approximates a protocol field.  For the
numeric machinery a segment is interpreted as a feature vector whose i-th
component is the unsigned value of byte i.

Everything here is immutable after construction and safe to share between
workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Message:
    """One captured network message.

    ``true_type`` and ``true_boundaries`` carry externally supplied ground
    truth (opaque type label, ascending field start offsets) and are used
    only for the boundary segmenter and for evaluation.
    """

    id: int
    data: bytes
    true_type: str | None = None
    true_boundaries: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(self.data) == 0:
            raise ValueError(f"message {self.id}: empty payload")
        if self.true_boundaries is not None:
            b = self.true_boundaries
            if len(b) == 0 or b[0] != 0:
                raise ValueError(f"message {self.id}: first field offset must be 0")
            if any(y <= x for x, y in zip(b, b[1:])):
                raise ValueError(f"message {self.id}: field offsets not strictly ascending")
            if b[-1] >= len(self.data):
                raise ValueError(
                    f"message {self.id}: field offset {b[-1]} beyond payload of {len(self.data)} bytes"
                )


@dataclass(frozen=True)
class Segment:
    """A contiguous byte slice of a message, the unit of comparison.

    ``is_char`` marks segments recognised as character sequences; pairs of
    char segments are treated as more similar than their raw byte values
    suggest.
    """

    message_id: int
    offset: int
    data: bytes
    is_char: bool = False

    def __post_init__(self):
        if len(self.data) == 0:
            raise ValueError("empty segment")
        if self.offset < 0:
            raise ValueError("negative segment offset")

    @property
    def end(self) -> int:
        return self.offset + len(self.data)

    @property
    def value(self) -> tuple[bytes, bool]:
        """Key identifying equal-for-dissimilarity segments."""
        return (self.data, self.is_char)


def feature_vector(data: bytes) -> np.ndarray:
    """Interpret a byte sequence as a vector of its unsigned byte values.

    Component i equals byte i as an integer in [0, 255]; the dimension
    equals the byte length.
    """
    return np.frombuffer(data, dtype=np.uint8).astype(np.float64)


@dataclass(frozen=True)
class AnalysisConfig:
    """All tunable parameters of the inference pipeline.

    penalty_f
        Steepness of the non-linear penalty applied to the absolute length
        difference when comparing segments of unequal length.
    gap_penalty
        Score for inserting a gap during message alignment; must be negative.
    match_bound / mismatch_bound
        Upper and lower bounds of the segment similarity spectrum (fixed at
        1 and 0); used to normalise alignment scores into dissimilarities.
    min_samples
        DBSCAN core-point threshold; the neighbourhood count includes the
        point itself.
    epsilon_factor
        Multiplier applied to the auto-configured DBSCAN epsilon.  Heuristic
        segmentations warrant a tighter radius (0.8), exact ones use 1.0.
    char_*
        Thresholds of the character-sequence detector: maximum byte value
        (exclusive), minimum length, bounds on the mean of non-zero bytes,
        and the tolerated ratio of non-printable non-zero bytes.
    trace_limit
        Maximum number of messages kept per trace after deduplication.
    """

    penalty_f: float = 0.33
    gap_penalty: float = -1.0
    match_bound: float = 1.0
    mismatch_bound: float = 0.0
    min_samples: int = 3
    epsilon_factor: float = 1.0
    char_mean_min: float = 50.0
    char_mean_max: float = 115.0
    char_min_len: int = 6
    char_nonprintable_ratio: float = 0.33
    char_byte_max: int = 0x7F
    trace_limit: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.penalty_f < 1.0:
            raise ConfigurationError(f"penalty_f must be in [0, 1), got {self.penalty_f}")
        if self.gap_penalty >= 0:
            raise ConfigurationError(f"gap_penalty must be negative, got {self.gap_penalty}")
        if self.min_samples < 2:
            raise ConfigurationError(f"min_samples must be >= 2, got {self.min_samples}")
        if not 0.0 < self.epsilon_factor <= 1.0:
            raise ConfigurationError(
                f"epsilon_factor must be in (0, 1], got {self.epsilon_factor}"
            )
        if self.trace_limit < 1:
            raise ConfigurationError(f"trace_limit must be >= 1, got {self.trace_limit}")
