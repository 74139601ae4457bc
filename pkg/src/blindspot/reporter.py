"""Corpus-level statistics over blind-spot ranges.

For each contiguous blind range this tallies the byte sequences that start
it (prefixes), the sequences immediately before it (preceding sequences),
every (preceding, prefix) pairing, its size, and where it starts relative
to the file length. "Total frequency" counts every overlapping occurrence
of a sequence anywhere in the corpus, so a blind-spot count can be read
against how common the sequence is overall.

Tallies are plain integer counters, so merging is exact, commutative and
associative.
"""
from __future__ import annotations

import csv
import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple, Union

from .analyzer import BlindSpotReport, Range, merge_ranges

MAX_SEQ = 7
POSITION_BUCKETS = 10
TABLES = ("prefix", "preceding", "pairs")

Entry = Union[Tuple[bytes, BlindSpotReport], Tuple[bytes, BlindSpotReport, str]]


class ReportConfigError(ValueError):
    pass


def escape(seq: bytes) -> str:
    """Printable ASCII as is; space, backslash and everything else as ``\\xNN``."""
    return "".join(chr(b) if 0x21 <= b <= 0x7E and b != 0x5C else f"\\x{b:02X}" for b in seq)


def size_bucket(size: int) -> int:
    return size.bit_length() - 1


def size_bucket_label(bucket: int) -> str:
    return f"{1 << bucket}-{(1 << (bucket + 1)) - 1}"


def position_bucket(start: int, length: int) -> int:
    return min(POSITION_BUCKETS - 1, (POSITION_BUCKETS * start) // length)


_COUNTERS = ("prefix", "preceding", "pairs", "ngrams", "sizes", "positions",
             "position_size_sum", "position_size_sq")
_TOTALS = ("ranges", "files", "bytes_total", "blind_bytes")


@dataclass
class CorpusStats:
    prefix: Counter = field(default_factory=Counter)
    preceding: Counter = field(default_factory=Counter)
    pairs: Counter = field(default_factory=Counter)
    # overlapping occurrences of every sequence up to 2 * MAX_SEQ bytes
    ngrams: Counter = field(default_factory=Counter)
    sizes: Counter = field(default_factory=Counter)
    positions: Counter = field(default_factory=Counter)
    position_size_sum: Counter = field(default_factory=Counter)
    position_size_sq: Counter = field(default_factory=Counter)
    ranges: int = 0
    files: int = 0
    bytes_total: int = 0
    blind_bytes: int = 0

    def update(self, other: "CorpusStats") -> None:
        """Add ``other``'s tallies into this one in place."""
        for name in _COUNTERS:
            getattr(self, name).update(getattr(other, name))
        for name in _TOTALS:
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def merge(self, other: "CorpusStats") -> "CorpusStats":
        out = CorpusStats()
        out.update(self)
        out.update(other)
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CorpusStats):
            return NotImplemented
        # Counter equality treats zero entries as absent
        return all(
            +getattr(self, n) == +getattr(other, n) if isinstance(getattr(self, n), Counter)
            else getattr(self, n) == getattr(other, n)
            for n in self.__dataclass_fields__
        )

    def total_frequency(self, seq: bytes) -> int:
        return self.ngrams[seq]

    def position_summary(self, bucket: int) -> Tuple[int, float, float]:
        """(range count, mean size, population std of size) for a decile."""
        n = self.positions[bucket]
        if not n:
            return 0, 0.0, 0.0
        s = self.position_size_sum[bucket]
        sq = self.position_size_sq[bucket]
        mean = s / n
        var = max(0.0, sq / n - mean * mean)
        return n, mean, math.sqrt(var)


def _ngrams(data: bytes, max_len: int) -> Counter:
    counts: Counter = Counter()
    for n in range(1, max_len + 1):
        counts.update(data[i:i + n] for i in range(len(data) - n + 1))
    return counts


def tally(data: bytes, ranges: Sequence[Range]) -> CorpusStats:
    """Statistics for one input and its blind ranges."""
    stats = CorpusStats(files=1, bytes_total=len(data))
    stats.ngrams = _ngrams(data, 2 * MAX_SEQ)
    for start, end in ranges:
        size = end - start
        stats.ranges += 1
        stats.blind_bytes += size
        prefixes = [data[start:start + j] for j in range(1, min(MAX_SEQ, size) + 1)]
        preceding = [data[start - j:start] for j in range(1, min(MAX_SEQ, start) + 1)]
        stats.prefix.update(prefixes)
        stats.preceding.update(preceding)
        stats.pairs.update((p, q) for p in preceding for q in prefixes)
        stats.sizes[size_bucket(size)] += 1
        bucket = position_bucket(start, len(data))
        stats.positions[bucket] += 1
        stats.position_size_sum[bucket] += size
        stats.position_size_sq[bucket] += size * size
    return stats


def _entry_ranges(entry: Entry) -> Tuple[bytes, List[Range]]:
    data, report = entry[0], entry[1]
    if len(entry) > 2:
        name = entry[2]
    elif len(report.sources) == 1:
        name = report.sources[0].name
    else:
        raise ReportConfigError("report has several sources; name the one matching the input")
    sid = [s.name for s in report.sources].index(name)
    if report.sources[sid].length != len(data):
        raise ReportConfigError(
            f"input of {len(data)} bytes does not match source {name!r} "
            f"of length {report.sources[sid].length}")
    ranges = merge_ranges(off for off in report.blind_spots if off.source == sid)
    return data, ranges.get(sid, [])


def corpus_stats(entries: Iterable[Entry]) -> CorpusStats:
    stats = CorpusStats()
    for entry in entries:
        data, ranges = _entry_ranges(entry)
        stats.update(tally(data, ranges))
    return stats


def top_k(stats: CorpusStats, table: str, k: int) -> List[tuple]:
    """Most common rows of a table, ties broken by byte sequence.

    prefix/preceding rows are ``(sequence, blind count, total frequency)``;
    pair rows are ``(preceding, prefix, blind count, total frequency of the
    joined sequence)``. Sequences are escaped.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if table not in TABLES:
        raise ValueError(f"unknown table {table!r}")
    counts = getattr(stats, table)
    keys = sorted((key for key in counts if counts[key]), key=lambda key: (-counts[key], key))[:k]
    if table == "pairs":
        return [(escape(p), escape(q), counts[(p, q)], stats.total_frequency(p + q)) for p, q in keys]
    return [(escape(key), counts[key], stats.total_frequency(key)) for key in keys]


def _write(path: str, header: List[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_csv(stats: CorpusStats, destination: Union[str, "os.PathLike[str]"]) -> List[str]:
    """Write prefixes.csv, preceding.csv, sizes.csv and positions.csv into a directory."""
    os.makedirs(destination, exist_ok=True)
    paths = []
    for table, fname in (("prefix", "prefixes.csv"), ("preceding", "preceding.csv")):
        counts = getattr(stats, table)
        keys = sorted((s for s in counts if counts[s]), key=lambda s: (-counts[s], s))
        path = os.path.join(destination, fname)
        _write(path, ["sequence", "length", "blind_spots", "total_frequency"],
               ((escape(s), len(s), counts[s], stats.total_frequency(s)) for s in keys))
        paths.append(path)

    path = os.path.join(destination, "sizes.csv")
    top = max((b for b in stats.sizes if stats.sizes[b]), default=None)
    rows = [] if top is None else [
        (size_bucket_label(b), 1 << b, (1 << (b + 1)) - 1, stats.sizes[b]) for b in range(top + 1)
    ]
    _write(path, ["bucket", "min_size", "max_size", "count"], rows)
    paths.append(path)

    path = os.path.join(destination, "positions.csv")
    rows = []
    if stats.ranges:
        for b in range(POSITION_BUCKETS):
            n, mean, std = stats.position_summary(b)
            rows.append((b, f"{b / POSITION_BUCKETS:.1f}", f"{(b + 1) / POSITION_BUCKETS:.1f}",
                         n, f"{mean:.6g}", f"{std:.6g}"))
    _write(path, ["bucket", "start", "end", "count", "mean_size", "std_size"], rows)
    paths.append(path)
    return paths


def summary(stats: CorpusStats, k: int = 20) -> dict:
    return {
        "files": stats.files,
        "bytes": stats.bytes_total,
        "blind_bytes": stats.blind_bytes,
        "ranges": stats.ranges,
        "unique_prefixes": sum(1 for v in stats.prefix.values() if v),
        "unique_preceding": sum(1 for v in stats.preceding.values() if v),
        "unique_pairs": sum(1 for v in stats.pairs.values() if v),
        "top_prefixes": [list(r) for r in top_k(stats, "prefix", k)],
        "top_preceding": [list(r) for r in top_k(stats, "preceding", k)],
        "top_pairs": [list(r) for r in top_k(stats, "pairs", k)],
    }


def summary_json(stats: CorpusStats, k: int = 20) -> str:
    return json.dumps(summary(stats, k), indent=2) + "\n"
