"""Binary ``.bspt`` trace files.

All integers are little-endian. The file is a fixed 52-byte header followed
by three sections whose offsets the header records::

    header
      magic          4s   b"BSPT"
      version        u32  1
      label_count    u64
      source_count   u32
      output_count   u64
      sources_off    u64  (always 52)
      labels_off     u64
      outputs_off    u64
    source table, one entry per source
      name_len       u16
      name           UTF-8 bytes
      length         u64
      read bitmap    ceil(length / 8) bytes, bit (off % 8) of byte (off // 8)
                     set iff offset ``off`` was read
    label table, 16-byte record per label, label 1 first
      kind           u8   1 = canonical, 2 = union
      flags          u8   bit 0 = affected control flow
      source_id      u16  canonical only, else 0
      field_a        u64  canonical: byte offset;
                          union: parent_a (low 32 bits) | parent_b (high 32 bits)
      reserved       u32  0
    output events, 16 bytes each
      position       u64
      label          u32
      byte           u8
      pad            3x   0
"""
from __future__ import annotations

import io
import os
import struct
from typing import BinaryIO, List, Set, Union

import numpy as np

from .artifact import OutputEvent, SourceInfo, TraceArtifact
from .label_store import AFFECTS_CF, CANONICAL, UNION, LabelStore

MAGIC = b"BSPT"
VERSION = 1

HEADER = struct.Struct("<4sIQIQQQQ")
HEADER_SIZE = HEADER.size  # 52

LABEL_DTYPE = np.dtype([
    ("kind", "u1"), ("flags", "u1"), ("source", "<u2"),
    ("field_a", "<u8"), ("reserved", "<u4"),
])
OUTPUT_DTYPE = np.dtype([
    ("position", "<u8"), ("label", "<u4"), ("byte", "u1"), ("pad", "u1", (3,)),
])
assert LABEL_DTYPE.itemsize == 16 and OUTPUT_DTYPE.itemsize == 16

PathOrFile = Union[str, "os.PathLike[str]", BinaryIO]


class FormatError(ValueError):
    """Base class for malformed trace files."""


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class TruncatedSection(FormatError):
    pass


class InvariantViolation(FormatError):
    pass


def _bitmap(offsets: Set[int], length: int) -> bytes:
    bits = np.zeros(length, dtype=np.uint8)
    if offsets:
        bits[np.fromiter(offsets, dtype=np.int64, count=len(offsets))] = 1
    return np.packbits(bits, bitorder="little").tobytes()


def _source_entry(src: SourceInfo, offsets: Set[int]) -> bytes:
    name = src.name.encode("utf-8")
    if len(name) > 0xFFFF:
        raise ValueError(f"source name too long: {src.name[:40]!r}...")
    return struct.pack("<H", len(name)) + name + struct.pack("<Q", src.length) + _bitmap(offsets, src.length)


def dumps(trace: TraceArtifact) -> bytes:
    store = trace.labels
    n = len(store)
    if len(trace.sources) > 0xFFFF:
        raise ValueError("at most 65535 sources fit in a trace")

    sources = b"".join(_source_entry(s, r) for s, r in zip(trace.sources, trace.read_sets))

    table = np.zeros(n, dtype=LABEL_DTYPE)
    if n:
        kind = np.frombuffer(store.kinds, dtype=np.uint8)[1:]
        a = np.array(store.field_a[1:], dtype=np.uint64)
        b = np.array(store.field_b[1:], dtype=np.uint64)
        canon = kind == CANONICAL
        table["kind"] = kind
        table["flags"] = np.frombuffer(store.flags, dtype=np.uint8)[1:]
        table["source"] = np.where(canon, a, 0).astype(np.uint16)
        table["field_a"] = np.where(canon, b, a | (b << np.uint64(32)))

    events = np.zeros(len(trace.outputs), dtype=OUTPUT_DTYPE)
    if trace.outputs:
        events["position"] = [ev.position for ev in trace.outputs]
        events["label"] = [ev.label for ev in trace.outputs]
        events["byte"] = [ev.value for ev in trace.outputs]

    labels_off = HEADER_SIZE + len(sources)
    outputs_off = labels_off + table.nbytes
    header = HEADER.pack(MAGIC, VERSION, n, len(trace.sources), len(trace.outputs),
                         HEADER_SIZE, labels_off, outputs_off)
    return b"".join((header, sources, table.tobytes(), events.tobytes()))


def write_trace(trace: TraceArtifact, destination: PathOrFile) -> int:
    """Serialize ``trace``; returns the number of bytes written."""
    data = dumps(trace)
    if hasattr(destination, "write"):
        destination.write(data)
    else:
        with open(destination, "wb") as fh:
            fh.write(data)
    return len(data)


def _section_start(name: str, offset: int, expected: int, size: int) -> None:
    if offset > size:
        raise TruncatedSection(f"{name} section starts at {offset}, past end of file ({size} bytes)")
    if offset != expected:
        raise InvariantViolation(f"{name} section offset {offset} does not match expected {expected}")


def loads(data: bytes) -> TraceArtifact:
    size = len(data)
    if size < HEADER_SIZE:
        raise TruncatedSection(f"header needs {HEADER_SIZE} bytes, file has {size}")
    (magic, version, n_labels, n_sources, n_outputs,
     sources_off, labels_off, outputs_off) = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported trace version {version}")

    _section_start("source", sources_off, HEADER_SIZE, size)
    sources: List[SourceInfo] = []
    read_sets: List[Set[int]] = []
    pos = sources_off
    for sid in range(n_sources):
        if pos + 2 > size:
            raise TruncatedSection(f"source entry {sid} truncated")
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + name_len + 8 > size:
            raise TruncatedSection(f"source entry {sid} truncated")
        try:
            name = data[pos:pos + name_len].decode("utf-8")
        except UnicodeDecodeError:
            raise InvariantViolation(f"source {sid} name is not UTF-8") from None
        pos += name_len
        (length,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        nbytes = (length + 7) // 8
        if pos + nbytes > size:
            raise TruncatedSection(f"read bitmap of source {sid} truncated")
        bits = np.unpackbits(np.frombuffer(data, np.uint8, nbytes, pos), bitorder="little")
        pos += nbytes
        if bits[length:].any():
            raise InvariantViolation(f"read bitmap of source {sid} marks offsets past its length")
        sources.append(SourceInfo(name, length))
        read_sets.append(set(np.flatnonzero(bits).tolist()))

    _section_start("label", labels_off, pos, size)
    if labels_off + 16 * n_labels > size:
        raise TruncatedSection(f"label table of {n_labels} records truncated")
    _section_start("output", outputs_off, labels_off + 16 * n_labels, size)
    if outputs_off + 16 * n_outputs > size:
        raise TruncatedSection(f"output section of {n_outputs} events truncated")
    if outputs_off + 16 * n_outputs != size:
        raise InvariantViolation(f"{size - outputs_off - 16 * n_outputs} trailing bytes after output section")

    table = np.frombuffer(data, LABEL_DTYPE, n_labels, labels_off)
    events = np.frombuffer(data, OUTPUT_DTYPE, n_outputs, outputs_off)
    store = _load_labels(table, sources, read_sets)

    if n_outputs:
        if (events["label"] > n_labels).any():
            raise InvariantViolation("output event refers to an unknown label")
        if events["pad"].any():
            raise InvariantViolation("nonzero padding in output event")
        if (events["position"] != np.arange(n_outputs, dtype=np.uint64)).any():
            raise InvariantViolation("output positions are not sequential")
    outputs = [OutputEvent(p, v, l) for p, l, v in zip(
        events["position"].tolist(), events["label"].tolist(), events["byte"].tolist())]
    return TraceArtifact(store, sources, read_sets, outputs)


def _load_labels(table: np.ndarray, sources: List[SourceInfo], read_sets: List[Set[int]]) -> LabelStore:
    n = len(table)
    kind = table["kind"]
    if n == 0:
        if any(read_sets):
            raise InvariantViolation("read offsets without canonical labels")
        return LabelStore.from_arrays(b"", b"", [], [], [s.length for s in sources])
    ids = np.arange(1, n + 1, dtype=np.uint64)
    bad = np.flatnonzero((kind != CANONICAL) & (kind != UNION))
    if bad.size:
        raise InvariantViolation(f"label {bad[0] + 1} has unknown kind {kind[bad[0]]}")
    if (table["flags"] & ~np.uint8(AFFECTS_CF)).any():
        raise InvariantViolation("unknown label flag bits")
    if table["reserved"].any():
        raise InvariantViolation("nonzero reserved label field")

    fa = table["field_a"]
    canon = kind == CANONICAL
    union = ~canon
    src = table["source"].astype(np.int64)
    pa = fa & np.uint64(0xFFFFFFFF)
    pb = fa >> np.uint64(32)

    if (union & (src != 0)).any():
        raise InvariantViolation("union record with nonzero source id")
    bad = np.flatnonzero(union & ~((pa > 0) & (pa < pb) & (pb < ids)))
    if bad.size:
        i = bad[0]
        raise InvariantViolation(f"union label {i + 1} has invalid parents ({pa[i]}, {pb[i]})")

    lengths = np.array([s.length for s in sources] or [0], dtype=np.uint64)
    if (canon & (src >= len(sources))).any():
        raise InvariantViolation("canonical label refers to an unknown source")
    src_c = np.where(canon, src, 0)
    bad = np.flatnonzero(canon & (fa >= lengths[src_c]))
    if bad.size:
        raise InvariantViolation(f"canonical label {bad[0] + 1} offset beyond its source length")

    pairs = list(zip(src[canon].tolist(), fa[canon].tolist()))
    expected = {(sid, off) for sid, offs in enumerate(read_sets) for off in offs}
    if len(pairs) != len(expected) or set(pairs) != expected:
        raise InvariantViolation("canonical labels do not match the read set one-to-one")

    a = np.where(canon, src, pa.astype(np.int64))
    b = np.where(canon, fa, pb).astype(np.int64)
    return LabelStore.from_arrays(
        kind.tobytes(), table["flags"].tobytes(), a.tolist(), b.tolist(),
        [s.length for s in sources],
    )


def read_trace(source: Union[PathOrFile, bytes]) -> TraceArtifact:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return loads(bytes(source))
    if hasattr(source, "read"):
        return loads(source.read())
    with open(source, "rb") as fh:
        return loads(fh.read())


def expected_size(trace: TraceArtifact) -> int:
    """Exact file size ``write_trace`` produces for ``trace``."""
    entries = sum(2 + len(s.name.encode("utf-8")) + 8 + (s.length + 7) // 8 for s in trace.sources)
    return HEADER_SIZE + entries + 16 * len(trace.labels) + 16 * len(trace.outputs)


__all__ = [
    "BadMagic", "FormatError", "InvariantViolation", "TruncatedSection",
    "UnsupportedVersion", "dumps", "expected_size", "loads", "read_trace",
    "write_trace",
]
