"""Trace ingestion: classic pcap files, the canonical JSON trace format,
and trace preprocessing (payload dedup, truncation).

Only classic pcap is supported (magic 0xa1b2c3d4 in either byte order, no
pcapng, no nanosecond variant).  Link types: Ethernet and raw IPv4.  The
reader extracts UDP payloads matching a port filter; anything else is
skipped.  Richer protocol filtering is left to external capture tooling.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass

from .errors import EmptyTraceError, TraceFormatError, UnsupportedInputError
from .model import Message

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_SWAPPED = 0xD4C3B2A1

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW_IP = (12, 101)  # both DLT_RAW variants, payload starts at the IP header

ETHERTYPE_IPV4 = 0x0800
IPPROTO_UDP = 17

log = logging.getLogger(__name__)

_FRAGMENT = object()  # sentinel: IPv4 fragment, skipped but counted


@dataclass(frozen=True)
class Trace:
    """An ordered set of messages of one protocol.

    Message ids are always 0..n-1 in list order.
    """

    protocol_name: str
    messages: tuple[Message, ...]

    def __post_init__(self):
        if len(self.messages) == 0:
            raise EmptyTraceError(f"trace {self.protocol_name!r} has no messages")
        for i, m in enumerate(self.messages):
            if m.id != i:
                raise ValueError(f"message ids not consecutive: expected {i}, got {m.id}")

    def __len__(self) -> int:
        return len(self.messages)


def read_pcap(path, udp_port: int, max_messages: int = 2**31) -> Trace:
    """Extract UDP payloads from a classic pcap file.

    Returns one message per UDP datagram whose source or destination port
    equals ``udp_port``, in capture order, payload bytes exactly as on the
    wire.  Fragmented IPv4 packets, non-IPv4 frames and truncated records
    are skipped.
    """
    if not 0 <= udp_port <= 65535:
        raise ValueError(f"udp_port out of range: {udp_port}")
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 24:
        raise TraceFormatError(f"{path}: too short for a pcap global header")

    magic = struct.unpack("<I", raw[:4])[0]
    if magic == PCAP_MAGIC:
        endian = "<"
    elif magic == PCAP_MAGIC_SWAPPED:
        endian = ">"
    else:
        raise TraceFormatError(f"{path}: not a classic pcap file (magic {magic:#010x})")

    _vmaj, _vmin, _zone, _sigfigs, _snaplen, linktype = struct.unpack(
        endian + "HHiIII", raw[4:24]
    )
    if linktype == LINKTYPE_ETHERNET:
        ip_offset = 14
    elif linktype in LINKTYPE_RAW_IP:
        ip_offset = 0
    else:
        raise UnsupportedInputError(f"{path}: unsupported link type {linktype}")

    messages: list[Message] = []
    fragments = 0
    pos = 24
    rec_hdr = struct.Struct(endian + "IIII")
    while pos + 16 <= len(raw) and len(messages) < max_messages:
        _ts_sec, _ts_usec, incl_len, _orig_len = rec_hdr.unpack_from(raw, pos)
        pos += 16
        if pos + incl_len > len(raw):
            raise TraceFormatError(f"{path}: truncated packet record at offset {pos - 16}")
        frame = raw[pos : pos + incl_len]
        pos += incl_len

        payload = _udp_payload(frame, ip_offset, udp_port)
        if payload is _FRAGMENT:
            fragments += 1
        elif payload:
            messages.append(Message(id=len(messages), data=payload))

    if fragments:
        log.warning("%s: skipped %d fragmented IPv4 packets", path, fragments)
    if not messages:
        raise EmptyTraceError(f"{path}: no UDP payloads on port {udp_port}")
    return Trace(protocol_name=f"udp/{udp_port}", messages=tuple(messages))


def _udp_payload(frame: bytes, ip_offset: int, udp_port: int):
    """Pull the UDP payload out of one captured frame.

    Returns the payload bytes, the _FRAGMENT sentinel for IPv4 fragments,
    or None for frames to skip silently.
    """
    if ip_offset:
        if len(frame) < ip_offset:
            return None
        ethertype = struct.unpack("!H", frame[12:14])[0]
        if ethertype != ETHERTYPE_IPV4:
            return None
    ip = frame[ip_offset:]
    if len(ip) < 20:
        return None
    ver_ihl = ip[0]
    if ver_ihl >> 4 != 4:
        return None
    ihl = (ver_ihl & 0x0F) * 4
    if ihl < 20 or len(ip) < ihl + 8:
        return None
    if ip[9] != IPPROTO_UDP:
        return None
    flags_frag = struct.unpack("!H", ip[6:8])[0]
    if flags_frag & 0x1FFF or flags_frag & 0x2000:  # fragment offset or MF set
        return _FRAGMENT
    sport, dport, udp_len = struct.unpack("!HHH", ip[ihl : ihl + 6])
    if sport != udp_port and dport != udp_port:
        return None
    if udp_len < 8 or len(ip) < ihl + udp_len:
        return None
    return ip[ihl + 8 : ihl + udp_len] or None


def read_trace_json(path) -> Trace:
    """Read a trace from the canonical JSON format.

    Schema: ``{"protocol": str, "messages": [{"data": hex, "type"?: str,
    "fields"?: [int, ...]}]}`` where "fields" lists ascending field start
    offsets beginning at 0.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"{path}: invalid JSON: {exc}") from exc

    if not isinstance(doc, dict) or "messages" not in doc:
        raise TraceFormatError(f"{path}: expected an object with a 'messages' array")
    protocol = doc.get("protocol", "unknown")
    entries = doc["messages"]
    if not isinstance(entries, list) or not entries:
        raise TraceFormatError(f"{path}: 'messages' must be a non-empty array")

    messages = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "data" not in entry:
            raise TraceFormatError(f"{path}: message {i} lacks a 'data' field")
        hexstr = entry["data"]
        try:
            data = bytes.fromhex(hexstr)
        except (ValueError, TypeError) as exc:
            raise TraceFormatError(f"{path}: message {i}: bad hex payload: {exc}") from exc
        fields = entry.get("fields")
        boundaries = None
        if fields is not None:
            if not isinstance(fields, list) or not all(isinstance(x, int) for x in fields):
                raise TraceFormatError(f"{path}: message {i}: 'fields' must be an integer array")
            boundaries = tuple(fields)
        try:
            messages.append(
                Message(
                    id=i,
                    data=data,
                    true_type=entry.get("type"),
                    true_boundaries=boundaries,
                )
            )
        except ValueError as exc:
            raise TraceFormatError(f"{path}: message {i}: {exc}") from exc
    return Trace(protocol_name=protocol, messages=tuple(messages))


def write_trace_json(trace: Trace, path) -> None:
    """Serialize a trace back into the canonical JSON format."""
    entries = []
    for m in trace.messages:
        entry: dict = {"data": m.data.hex()}
        if m.true_type is not None:
            entry["type"] = m.true_type
        if m.true_boundaries is not None:
            entry["fields"] = list(m.true_boundaries)
        entries.append(entry)
    doc = {"protocol": trace.protocol_name, "messages": entries}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def preprocess(trace: Trace, limit: int) -> Trace:
    """Deduplicate messages by payload (keeping first occurrences), then
    truncate to the first ``limit`` messages and reassign ids."""
    if limit < 1:
        raise ValueError(f"limit must be >= 1, got {limit}")
    seen: set[bytes] = set()
    kept = []
    for m in trace.messages:
        if m.data in seen:
            continue
        seen.add(m.data)
        kept.append(m)
        if len(kept) >= limit:
            break
    if not kept:
        raise EmptyTraceError(f"trace {trace.protocol_name!r} empty after preprocessing")
    renumbered = tuple(
        Message(id=i, data=m.data, true_type=m.true_type, true_boundaries=m.true_boundaries)
        for i, m in enumerate(kept)
    )
    return Trace(protocol_name=trace.protocol_name, messages=renumbered)
