"""Shared test helpers: an independent pcap writer (oracle for the reader)
and a generator for a synthetic four-type protocol used by the end-to-end
benchmark.
"""

from __future__ import annotations

import json
import random
import socket
import struct

# --- independent pcap construction (never uses the package's reader) -------


def udp_frame(sport: int, dport: int, payload: bytes, src="10.0.0.1", dst="10.0.0.2") -> bytes:
    """A full Ethernet/IPv4/UDP frame around the given payload."""
    eth = b"\x02" * 6 + b"\x04" * 6 + struct.pack("!H", 0x0800)
    udp_len = 8 + len(payload)
    ip = struct.pack(
        "!BBHHHBBH4s4s",
        0x45, 0, 20 + udp_len, 0x1234, 0, 64, 17, 0,
        socket.inet_aton(src), socket.inet_aton(dst),
    )
    udp = struct.pack("!HHHH", sport, dport, udp_len, 0)
    return eth + ip + udp + payload


def tcp_frame(sport: int, dport: int, payload: bytes) -> bytes:
    eth = b"\x02" * 6 + b"\x04" * 6 + struct.pack("!H", 0x0800)
    tcp = struct.pack("!HHIIBBHHH", sport, dport, 1, 1, 5 << 4, 0x18, 8192, 0, 0)
    ip = struct.pack(
        "!BBHHHBBH4s4s",
        0x45, 0, 20 + len(tcp) + len(payload), 0x1234, 0, 64, 6, 0,
        socket.inet_aton("10.0.0.1"), socket.inet_aton("10.0.0.2"),
    )
    return eth + ip + tcp + payload


def build_pcap(frames: list[bytes], endian: str = "<", linktype: int = 1) -> bytes:
    """Classic pcap bytes in the requested byte order."""
    header = struct.pack(endian + "IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, linktype)
    parts = [header]
    for i, frame in enumerate(frames):
        parts.append(struct.pack(endian + "IIII", i, 0, len(frame), len(frame)))
        parts.append(frame)
    return b"".join(parts)


# --- synthetic four-type protocol ------------------------------------------
#
# Each message type has a distinct 4-byte-aligned layout: a static head word
# whose first byte is the type discriminator, further static words, and three
# dynamic word slots.  Dynamic words are drawn from a small per-type pool of
# rotated patterns, and the (slot1, slot2, slot3) combinations are sampled
# without replacement, so intra-type dissimilarities sit in a narrow band
# well below the inter-type level (distinct lengths, contrasting statics).


def _pool(lo: int, hi: int) -> list[bytes]:
    """Four pairwise-equidistant words: constant-Hamming-2 lo/hi patterns,
    so any two pool words differ in exactly two byte positions."""
    return [
        bytes([lo, lo, lo, lo]),
        bytes([lo, lo, hi, hi]),
        bytes([lo, hi, lo, hi]),
        bytes([lo, hi, hi, lo]),
    ]


_LAYOUTS = {
    # name: (discriminator, word pattern, static words, dyn pool (lo, hi))
    # pattern: H = head word carrying the discriminator byte,
    #          S = next static word, D = next dynamic slot
    # The lo/hi contrast is (hi-lo)/(hi+lo) = k/128 with k the word count,
    # which makes the intra-type dissimilarity levels of every type the
    # exact same dyadic floats m * 2^-9 (dyadic arithmetic stays exact),
    # so the auto-configured epsilon treats all types symmetrically.
    # Keep per_type <= 54: beyond that the split heuristic's threshold
    # floor(ln(size)) reaches the 4-value pools and severs clusters.
    "A": (0x01, "HDSDD", [[0x04, 0x00, 0x08, 0x00]], (123, 133)),
    "B": (0x02, "HDSDSDS",
          [[0x00, 0xF0, 0x00, 0xE0], [0xD0, 0x00, 0xC0, 0x00], [0xE8, 0x10, 0xE8, 0x10]],
          (121, 135)),
    "C": (0x03, "HSDSDSDSS",
          [[0x60, 0x60, 0x00, 0x00], [0x00, 0x00, 0x70, 0x70], [0x7F, 0x01, 0x7F, 0x01],
           [0x14, 0x7A, 0x14, 0x7A], [0x3C, 0x3C, 0x3C, 0x01]],
          (119, 137)),
    "D": (0x04, "HDSSDSSDSSS",
          [[0xFF, 0x00, 0x00, 0xFF], [0x00, 0xFF, 0xFF, 0x00], [0x10, 0xE0, 0x10, 0xE0],
           [0xB0, 0x0B, 0xB0, 0x0B], [0x81, 0x18, 0x81, 0x18], [0xC4, 0x02, 0xC4, 0x02],
           [0x2A, 0xD4, 0x2A, 0xD4], [0x99, 0x66, 0x99, 0x66]],
          (117, 139)),
}


def _build_message(name: str, combo: tuple[int, int, int]) -> bytes:
    disc, pattern, statics, (lo, hi) = _LAYOUTS[name]
    pool = _pool(lo, hi)
    head = bytes([disc, 0xAA, 0x55, disc ^ 0xFF])
    dyn_iter = iter(pool[q] for q in combo)
    static_iter = iter(statics)
    words = []
    for kind in pattern:
        if kind == "H":
            words.append(head)
        elif kind == "D":
            words.append(next(dyn_iter))
        else:
            words.append(bytes(next(static_iter)))
    return b"".join(words)


def benchmark_messages(per_type: int = 50, seed: int = 20210, dense: bool = False) -> list[tuple[str, bytes]]:
    """(type name, payload) pairs; payloads are pairwise distinct.

    With ``dense`` the dynamic-slot combinations are taken as a lexicographic
    prefix instead of a random sample, which keeps small traces densely
    connected (useful for tests far below the benchmark size).
    """
    rng = random.Random(seed)
    out = []
    for name in sorted(_LAYOUTS):
        combos = [(a, b, c) for a in range(4) for b in range(4) for c in range(4)]
        if not dense:
            rng.shuffle(combos)
        for combo in combos[:per_type]:
            out.append((name, _build_message(name, combo)))
    rng.shuffle(out)
    return out


def write_benchmark_trace(path, per_type: int = 50, seed: int = 20210) -> int:
    """Write the benchmark as a canonical JSON trace; returns message count."""
    messages = benchmark_messages(per_type, seed)
    doc = {
        "protocol": "synthetic4",
        "messages": [{"data": data.hex(), "type": name} for name, data in messages],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return len(messages)


# --- hand-built alignment tables --------------------------------------------


def make_table(rows: list[list[bytes | None]], label: int = 0, first_id: int = 0):
    """An AlignmentTable from literal cell values (None = gap); message ids
    are assigned sequentially and offsets follow the non-gap cells."""
    from tracetypes.align import AlignmentTable
    from tracetypes.model import Segment

    built = []
    ids = []
    for r, cells in enumerate(rows):
        mid = first_id + r
        offset = 0
        row = []
        for cell in cells:
            if cell is None:
                row.append(None)
            else:
                row.append(Segment(mid, offset, cell))
                offset += len(cell)
        built.append(row)
        ids.append(mid)
    table = AlignmentTable(cluster_label=label, message_ids=ids, rows=built)
    table.validate()
    return table
