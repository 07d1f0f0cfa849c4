import json

import pytest
from hypothesis import given, strategies as st

from synthproto import build_pcap, tcp_frame, udp_frame
from tracetypes.errors import EmptyTraceError, TraceFormatError, UnsupportedInputError
from tracetypes.ingest import Message, Trace, preprocess, read_pcap, read_trace_json, write_trace_json


def _write(tmp_path, name, data: bytes):
    p = tmp_path / name
    p.write_bytes(data)
    return p


class TestReadPcap:
    def test_udp_payloads_extracted_verbatim(self, tmp_path):
        payloads = [b"\x12\x34\x01\x00", b"hello dns", b"\x00" * 12]
        frames = [udp_frame(53, 40000 + i, p) for i, p in enumerate(payloads)]
        path = _write(tmp_path, "t.pcap", build_pcap(frames))
        trace = read_pcap(path, udp_port=53)
        assert [m.data for m in trace.messages] == payloads
        assert [m.id for m in trace.messages] == [0, 1, 2]

    def test_both_endian_magics_give_identical_trace(self, tmp_path):
        frames = [udp_frame(1000, 53, bytes([i, i + 1, i + 2])) for i in range(5)]
        little = _write(tmp_path, "le.pcap", build_pcap(frames, endian="<"))
        big = _write(tmp_path, "be.pcap", build_pcap(frames, endian=">"))
        t1 = read_pcap(little, 53)
        t2 = read_pcap(big, 53)
        assert [m.data for m in t1.messages] == [m.data for m in t2.messages]

    def test_port_filter_matches_either_direction(self, tmp_path):
        frames = [
            udp_frame(53, 5000, b"response"),
            udp_frame(5000, 53, b"query"),
            udp_frame(80, 81, b"other"),
        ]
        path = _write(tmp_path, "t.pcap", build_pcap(frames))
        trace = read_pcap(path, 53)
        assert [m.data for m in trace.messages] == [b"response", b"query"]

    def test_tcp_only_capture_is_empty(self, tmp_path):
        frames = [tcp_frame(50000, 445, b"\xffSMB")]
        path = _write(tmp_path, "t.pcap", build_pcap(frames))
        with pytest.raises(EmptyTraceError):
            read_pcap(path, 445)

    def test_bad_magic(self, tmp_path):
        path = _write(tmp_path, "t.pcap", b"\x0a\x0d\x0d\x0a" + b"\x00" * 28)
        with pytest.raises(TraceFormatError):
            read_pcap(path, 53)

    def test_nanosecond_magic_rejected(self, tmp_path):
        import struct

        data = struct.pack("<IHHiIII", 0xA1B23C4D, 2, 4, 0, 0, 65535, 1)
        path = _write(tmp_path, "t.pcap", data)
        with pytest.raises(TraceFormatError):
            read_pcap(path, 53)

    def test_unsupported_linktype(self, tmp_path):
        frames = [udp_frame(53, 53, b"x")]
        path = _write(tmp_path, "t.pcap", build_pcap(frames, linktype=105))
        with pytest.raises(UnsupportedInputError):
            read_pcap(path, 53)

    def test_raw_ip_linktype(self, tmp_path):
        frames = [udp_frame(53, 60, b"rawip")[14:]]  # strip the Ethernet header
        path = _write(tmp_path, "t.pcap", build_pcap(frames, linktype=101))
        trace = read_pcap(path, 53)
        assert trace.messages[0].data == b"rawip"

    def test_fragmented_packets_skipped(self, tmp_path):
        whole = udp_frame(53, 60, b"keepme")
        frag = bytearray(udp_frame(53, 60, b"dropme"))
        frag[14 + 6] = 0x20  # set the more-fragments flag in the IPv4 header
        path = _write(tmp_path, "t.pcap", build_pcap([bytes(frag), whole]))
        trace = read_pcap(path, 53)
        assert [m.data for m in trace.messages] == [b"keepme"]

    def test_max_messages(self, tmp_path):
        frames = [udp_frame(53, 60, bytes([i])) for i in range(10)]
        path = _write(tmp_path, "t.pcap", build_pcap(frames))
        trace = read_pcap(path, 53, max_messages=4)
        assert len(trace) == 4

    def test_truncated_record(self, tmp_path):
        good = build_pcap([udp_frame(53, 60, b"abc")])
        path = _write(tmp_path, "t.pcap", good[:-2])
        with pytest.raises(TraceFormatError):
            read_pcap(path, 53)


class TestReadTraceJson:
    def _json(self, tmp_path, doc):
        p = tmp_path / "t.json"
        p.write_text(json.dumps(doc))
        return p

    def test_minimal(self, tmp_path):
        p = self._json(tmp_path, {"messages": [{"data": "0208000807"}]})
        trace = read_trace_json(p)
        assert len(trace) == 1
        assert trace.messages[0].data == bytes.fromhex("0208000807")

    def test_fields_accepted(self, tmp_path):
        p = self._json(
            tmp_path,
            {"protocol": "demo", "messages": [{"data": "0208000807", "fields": [0, 2, 4], "type": "m0"}]},
        )
        trace = read_trace_json(p)
        m = trace.messages[0]
        assert m.true_boundaries == (0, 2, 4)
        assert m.true_type == "m0"
        assert trace.protocol_name == "demo"

    def test_fields_not_ascending(self, tmp_path):
        p = self._json(tmp_path, {"messages": [{"data": "0102", "fields": [1, 0]}]})
        with pytest.raises(TraceFormatError):
            read_trace_json(p)

    def test_boundary_beyond_length(self, tmp_path):
        p = self._json(tmp_path, {"messages": [{"data": "0102030405", "fields": [0, 2, 4, 7]}]})
        with pytest.raises(TraceFormatError):
            read_trace_json(p)

    def test_odd_hex(self, tmp_path):
        p = self._json(tmp_path, {"messages": [{"data": "012"}]})
        with pytest.raises(TraceFormatError):
            read_trace_json(p)

    def test_non_hex(self, tmp_path):
        p = self._json(tmp_path, {"messages": [{"data": "zz"}]})
        with pytest.raises(TraceFormatError):
            read_trace_json(p)

    def test_not_json(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text("not json at all{")
        with pytest.raises(TraceFormatError):
            read_trace_json(p)

    def test_roundtrip(self, tmp_path):
        messages = (
            Message(0, b"\x01\x02", true_type="a", true_boundaries=(0, 1)),
            Message(1, b"\x03"),
        )
        trace = Trace("demo", messages)
        p = tmp_path / "out.json"
        write_trace_json(trace, p)
        back = read_trace_json(p)
        assert back.protocol_name == "demo"
        assert [m.data for m in back.messages] == [m.data for m in messages]
        assert back.messages[0].true_boundaries == (0, 1)
        assert back.messages[1].true_type is None


class TestPreprocess:
    def _trace(self, payloads):
        return Trace("t", tuple(Message(i, p) for i, p in enumerate(payloads)))

    def test_dedup_keeps_first(self):
        t = preprocess(self._trace([b"A", b"B", b"A", b"C"]), 1000)
        assert [m.data for m in t.messages] == [b"A", b"B", b"C"]
        assert [m.id for m in t.messages] == [0, 1, 2]

    def test_truncation(self):
        payloads = [i.to_bytes(2, "big") for i in range(1500)]
        t = preprocess(self._trace(payloads), 1000)
        assert len(t) == 1000
        assert [m.data for m in t.messages] == payloads[:1000]

    def test_dup_then_limit(self):
        t = preprocess(self._trace([b"A", b"A"]), 1)
        assert [m.data for m in t.messages] == [b"A"]

    def test_limit_validation(self):
        with pytest.raises(ValueError):
            preprocess(self._trace([b"A"]), 0)

    @given(st.lists(st.binary(min_size=1, max_size=4), min_size=1, max_size=30))
    def test_idempotent(self, payloads):
        t = self._trace(payloads)
        once = preprocess(t, 10)
        twice = preprocess(once, 10)
        assert [m.data for m in once.messages] == [m.data for m in twice.messages]
        assert [m.id for m in once.messages] == [m.id for m in twice.messages]
