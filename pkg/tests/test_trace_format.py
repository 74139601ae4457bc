import io
import struct

import pytest
from hypothesis import given, settings

from blindspot.artifact import SourceInfo, TraceArtifact
from blindspot.interpreter import RunConfig, run
from blindspot.label_store import LabelStore
from blindspot.trace_format import (
    HEADER_SIZE,
    BadMagic,
    FormatError,
    InvariantViolation,
    TruncatedSection,
    UnsupportedVersion,
    dumps,
    expected_size,
    loads,
    read_trace,
    write_trace,
)

from strategies import artifacts


@pytest.fixture
def golden_trace(alg1):
    trace, _ = run(alg1, RunConfig({"in": bytes([40, 12, 7])}))
    return trace


def header(data):
    return struct.unpack_from("<4sIQIQQQQ", data)


def test_golden_layout(golden_trace):
    data = dumps(golden_trace)
    magic, version, n_labels, n_sources, n_outputs, s_off, l_off, o_off = header(data)
    assert (magic, version, n_labels, n_sources, n_outputs) == (b"BSPT", 1, 3, 1, 1)
    assert s_off == HEADER_SIZE == 52
    # name_len, "in", length 3, bitmap with offsets 0 and 1 read
    assert data[s_off:l_off] == b"\x02\x00in" + struct.pack("<Q", 3) + b"\x03"
    rec3 = data[l_off + 32:l_off + 48]
    kind, flags, src, field_a, reserved = struct.unpack("<BBHQI", rec3)
    assert (kind, flags, src, reserved) == (2, 1, 0, 0)
    assert (field_a & 0xFFFFFFFF, field_a >> 32) == (1, 2)
    rec2 = struct.unpack("<BBHQI", data[l_off + 16:l_off + 32])
    assert rec2 == (1, 0, 0, 1, 0)
    assert struct.unpack("<QIB3s", data[o_off:]) == (0, 3, 5, b"\0\0\0")


def test_empty_trace():
    trace = TraceArtifact(LabelStore(), [], [], [])
    data = dumps(trace)
    assert len(data) == HEADER_SIZE
    assert header(data)[2] == 0
    assert loads(data) == trace


def test_round_trip_file(tmp_path, golden_trace):
    path = tmp_path / "t.bspt"
    n = write_trace(golden_trace, path)
    assert n == path.stat().st_size == expected_size(golden_trace)
    back = read_trace(path)
    assert back == golden_trace
    assert back.labels.affects_cf(3)
    assert read_trace(io.BytesIO(path.read_bytes())) == golden_trace


@settings(max_examples=200, deadline=None)
@given(artifacts())
def test_round_trip_random(trace):
    data = dumps(trace)
    assert len(data) == expected_size(trace)
    assert loads(data) == trace


def _patch(data, offset, fmt, value):
    buf = bytearray(data)
    struct.pack_into(fmt, buf, offset, value)
    return bytes(buf)


def corruption_fixtures(data):
    _, _, n_labels, _, n_outputs, s_off, l_off, o_off = header(data)
    rec = lambda label: l_off + 16 * (label - 1)
    return {
        "magic": (_patch(data, 0, "<4s", b"\0\0\0\0"), BadMagic),
        "version-0": (_patch(data, 4, "<I", 0), UnsupportedVersion),
        "version-2": (_patch(data, 4, "<I", 2), UnsupportedVersion),
        "label-count": (_patch(data, 8, "<Q", n_labels + 1000), TruncatedSection),
        "output-count": (_patch(data, 20, "<Q", n_outputs + 5), TruncatedSection),
        "source-count": (_patch(data, 16, "<I", 0), InvariantViolation),
        "sources-offset": (_patch(data, 28, "<Q", 60), InvariantViolation),
        "labels-offset": (_patch(data, 36, "<Q", len(data) + 16), TruncatedSection),
        "outputs-offset": (_patch(data, 44, "<Q", o_off - 16), InvariantViolation),
        "truncated-tail": (data[:-1], TruncatedSection),
        "truncated-header": (data[:20], TruncatedSection),
        "trailing-byte": (data + b"\0", InvariantViolation),
        "label-kind": (_patch(data, rec(1), "<B", 3), InvariantViolation),
        "union-parent": (_patch(data, rec(3) + 4, "<Q", 1 | (3 << 32)), InvariantViolation),
        "canonical-offset": (_patch(data, rec(2) + 4, "<Q", 3), InvariantViolation),
        "output-label": (_patch(data, o_off + 8, "<I", n_labels + 1), InvariantViolation),
    }


def test_sixteen_corruptions(golden_trace):
    fixtures = corruption_fixtures(dumps(golden_trace))
    assert len(fixtures) == 16
    for name, (bad, error) in fixtures.items():
        with pytest.raises(error):
            loads(bad)


@pytest.mark.parametrize("field,value", [
    ("flags", 0x02),
    ("reserved", 1),
    ("union-source", 1),
    ("union-zero-parent", 0),
    ("pad", 1),
    ("position", 5),
])
def test_more_invariants(golden_trace, field, value):
    data = dumps(golden_trace)
    l_off, o_off = header(data)[6], header(data)[7]
    at, fmt = {
        "flags": (l_off + 1, "<B"),
        "reserved": (l_off + 12, "<I"),
        "union-source": (l_off + 32 + 2, "<H"),
        "union-zero-parent": (l_off + 32 + 4, "<I"),
        "pad": (o_off + 13, "<B"),
        "position": (o_off, "<Q"),
    }[field]
    with pytest.raises(InvariantViolation):
        loads(_patch(data, at, fmt, value))


def test_bitmap_inconsistencies(golden_trace):
    data = bytearray(dumps(golden_trace))
    bitmap_at = HEADER_SIZE + 2 + 2 + 8
    data[bitmap_at] = 0b0000_1011  # offset 3 is past the 3-byte source
    with pytest.raises(InvariantViolation):
        loads(bytes(data))
    data[bitmap_at] = 0b0000_0111  # offset 2 marked read but has no canonical label
    with pytest.raises(InvariantViolation):
        loads(bytes(data))


def test_bad_source_name(golden_trace):
    data = bytearray(dumps(golden_trace))
    data[HEADER_SIZE + 2] = 0xFF
    with pytest.raises(InvariantViolation):
        loads(bytes(data))


def test_any_magic_or_version_byte_corruption_rejected(golden_trace):
    data = dumps(golden_trace)
    for pos in range(8):
        for value in range(256):
            if value == data[pos]:
                continue
            bad = bytearray(data)
            bad[pos] = value
            with pytest.raises(BadMagic if pos < 4 else UnsupportedVersion):
                loads(bytes(bad))


def test_format_errors_share_base():
    for cls in (BadMagic, UnsupportedVersion, TruncatedSection, InvariantViolation):
        assert issubclass(cls, FormatError)


def test_large_source_table_and_status_not_serialized(alg1):
    trace, _ = run(alg1, RunConfig({"in": bytes(1000)}))
    back = loads(dumps(trace))
    assert back.sources == [SourceInfo("in", 1000)]
    assert back.status is None and trace.status is not None
    assert back == trace
