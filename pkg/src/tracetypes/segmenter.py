"""Message segmentation and segmentation refinement.

A segmentation is one ordered list of segments per message; per message the
segments are contiguous, start at offset 0 and cover the whole payload.
Base segmentations come from fixed-length chunking or from externally
supplied field boundaries.  Three refinements sharpen heuristic
segmentations: splitting at frequent segment values, merging runs of
character data, and exploding the first segment into single bytes.
"""

from __future__ import annotations

from collections import Counter

from .ingest import Trace
from .model import AnalysisConfig, Message, Segment

Segmentation = list[list[Segment]]

_PRINTABLE = frozenset(range(0x20, 0x7F)) | {0x09, 0x0A, 0x0D}


def segment_fixed(message: Message, chunk_len: int) -> list[Segment]:
    """Chop a message into fixed-length chunks; the final chunk may be shorter."""
    if chunk_len < 1:
        raise ValueError(f"chunk_len must be >= 1, got {chunk_len}")
    return [
        Segment(message.id, off, message.data[off : off + chunk_len])
        for off in range(0, len(message.data), chunk_len)
    ]


def segment_from_boundaries(message: Message) -> list[Segment]:
    """Segment a message at its ground-truth field boundaries."""
    if message.true_boundaries is None:
        raise ValueError(f"message {message.id} has no field boundaries")
    bounds = list(message.true_boundaries) + [len(message.data)]
    return [
        Segment(message.id, start, message.data[start:end])
        for start, end in zip(bounds, bounds[1:])
    ]


def detect_char_sequence(data: bytes, cfg: AnalysisConfig) -> bool:
    """Heuristically decide whether a byte sequence is character data.

    All of the following must hold:
      - every byte is below ``char_byte_max``;
      - the sequence has at least ``char_min_len`` bytes;
      - the mean of the non-zero bytes lies strictly between the mean
        thresholds (zero bytes are excluded so termination, padding and
        UTF-16 encoded latin text do not drag the mean down);
      - the ratio of bytes that are neither printable nor zero stays below
        ``char_nonprintable_ratio``.
    """
    if len(data) < cfg.char_min_len:
        return False
    if any(b >= cfg.char_byte_max for b in data):
        return False
    nonzero = [b for b in data if b != 0]
    if not nonzero:
        return False
    mean = sum(nonzero) / len(nonzero)
    if not cfg.char_mean_min < mean < cfg.char_mean_max:
        return False
    junk = sum(1 for b in data if b != 0 and b not in _PRINTABLE)
    return junk / len(data) < cfg.char_nonprintable_ratio


def refine_first_segment_split(segmentation: Segmentation) -> Segmentation:
    """Replace every message's first segment by one-byte segments."""
    refined = []
    for segments in segmentation:
        head = segments[0]
        split = [
            Segment(head.message_id, head.offset + i, head.data[i : i + 1])
            for i in range(len(head.data))
        ]
        refined.append(split + list(segments[1:]))
    return refined


def refine_frequent_value_split(segmentation: Segmentation, top_k: int = 3) -> Segmentation:
    """Split segments that contain one of the trace's most frequent segment
    values as a proper substring.

    Frequency counts whole-segment byte values across the trace; ties rank
    shorter values first, then lexicographically.  Each affected segment is
    split once, around the leftmost occurrence of the most frequent value
    found inside it.
    """
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    counts = Counter(seg.data for msg in segmentation for seg in msg)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], len(kv[0]), kv[0]))
    frequent = [value for value, _ in ranked[:top_k]]

    refined = []
    for segments in segmentation:
        out = []
        for seg in segments:
            out.extend(_split_at_frequent(seg, frequent))
        refined.append(out)
    return refined


def _split_at_frequent(seg: Segment, frequent: list[bytes]) -> list[Segment]:
    for value in frequent:
        if len(value) >= len(seg.data):
            continue  # equal or longer: never a proper substring
        i = seg.data.find(value)
        if i < 0:
            continue
        cuts = [0, i, i + len(value), len(seg.data)]
        return [
            Segment(seg.message_id, seg.offset + a, seg.data[a:b])
            for a, b in zip(cuts, cuts[1:])
            if b > a
        ]
    return [seg]


def refine_char_merge(segmentation: Segmentation, cfg: AnalysisConfig) -> Segmentation:
    """Merge adjacent segments whose concatenation looks like character data.

    Scans each message left to right; from each start segment the longest
    run (of two or more segments) passing the char detector is merged into
    a single segment flagged ``is_char``.  Standalone segments passing the
    detector are flagged without merging.
    """
    refined = []
    for segments in segmentation:
        out = []
        i = 0
        while i < len(segments):
            best_end = None
            for j in range(i + 1, len(segments)):
                merged = b"".join(s.data for s in segments[i : j + 1])
                if detect_char_sequence(merged, cfg):
                    best_end = j
            if best_end is not None:
                seg = segments[i]
                data = b"".join(s.data for s in segments[i : best_end + 1])
                out.append(Segment(seg.message_id, seg.offset, data, is_char=True))
                i = best_end + 1
            else:
                seg = segments[i]
                if not seg.is_char and detect_char_sequence(seg.data, cfg):
                    seg = Segment(seg.message_id, seg.offset, seg.data, is_char=True)
                out.append(seg)
                i += 1
        refined.append(out)
    return refined


def heuristic_refine(segmentation: Segmentation, cfg: AnalysisConfig, top_k: int = 3) -> Segmentation:
    """The full refinement pipeline for heuristic base segmentations:
    frequent-value split, then char merge, then first-segment split."""
    refined = refine_frequent_value_split(segmentation, top_k)
    refined = refine_char_merge(refined, cfg)
    return refine_first_segment_split(refined)


def segment_trace(trace: Trace, segmenter: str, cfg: AnalysisConfig, chunk_len: int = 4) -> Segmentation:
    """Segment every message of a trace.

    ``segmenter`` is one of:
      - "fixed4": fixed chunks of ``chunk_len`` bytes;
      - "boundaries": ground-truth field boundaries (requires "fields" on
        every message);
      - "refined": boundaries when available for all messages, else fixed
        chunks, then the heuristic refinement pipeline.
    """
    if segmenter == "fixed4":
        return [segment_fixed(m, chunk_len) for m in trace.messages]
    if segmenter == "boundaries":
        return [segment_from_boundaries(m) for m in trace.messages]
    if segmenter == "refined":
        if all(m.true_boundaries is not None for m in trace.messages):
            base = [segment_from_boundaries(m) for m in trace.messages]
        else:
            base = [segment_fixed(m, chunk_len) for m in trace.messages]
        return heuristic_refine(base, cfg)
    raise ValueError(f"unknown segmenter {segmenter!r}")


def check_coverage(trace: Trace, segmentation: Segmentation) -> None:
    """Assert the segmentation invariant: per message, segments are
    contiguous from offset 0 and reproduce the payload exactly."""
    if len(segmentation) != len(trace.messages):
        raise ValueError("segmentation does not cover every message")
    for message, segments in zip(trace.messages, segmentation):
        pos = 0
        for seg in segments:
            if seg.message_id != message.id or seg.offset != pos:
                raise ValueError(f"message {message.id}: segment gap or overlap at {pos}")
            if message.data[seg.offset : seg.end] != seg.data:
                raise ValueError(f"message {message.id}: segment bytes diverge at {seg.offset}")
            pos = seg.end
        if pos != len(message.data):
            raise ValueError(f"message {message.id}: segments cover {pos} of {len(message.data)} bytes")
