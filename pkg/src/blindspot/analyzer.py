"""Blind-spot enumeration over a finished trace.

A byte is a blind spot if the run never read it, or if its canonical label
is not an ancestor of any label written to output or of any label that
steered control flow. The second set is found with one descending sweep over
the label table: because parents always have smaller ids, clearing a label's
parents before visiting them propagates exclusion through the whole DAG.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Set, Tuple

from .artifact import SourceInfo, TraceArtifact
from .label_store import AFFECTS_CF, CANONICAL, SourceOffset

Range = Tuple[int, int]

CATEGORIES = ("not_read", "not_in_output", "blind_spot")

# flag byte -> 1 if the label never affected control flow
_KEEP_UNMARKED = bytes(0 if b & AFFECTS_CF else 1 for b in range(256))


@dataclass
class SweepCounters:
    inspections: int = 0
    removals: int = 0


@dataclass
class BlindSpotReport:
    sources: List[SourceInfo]
    not_read: Set[SourceOffset]
    not_in_output: Set[SourceOffset]
    counters: SweepCounters = field(default_factory=SweepCounters, compare=False)

    @property
    def blind_spots(self) -> Set[SourceOffset]:
        return self.not_read | self.not_in_output

    @property
    def ranges(self) -> Dict[str, List[Range]]:
        merged = merge_ranges(self.blind_spots)
        return {src.name: merged.get(sid, []) for sid, src in enumerate(self.sources)}

    @property
    def totals(self) -> Dict[str, int]:
        return {
            "not_read": len(self.not_read),
            "not_in_output": len(self.not_in_output),
            "blind_spot": len(self.blind_spots),
        }

    def offsets(self, source: str) -> List[int]:
        sid = [s.name for s in self.sources].index(source)
        return sorted(off for s, off in self.blind_spots if s == sid)

    def to_json(self) -> dict:
        nr = merge_ranges(self.not_read)
        nio = merge_ranges(self.not_in_output)
        return {
            "sources": [{"name": s.name, "length": s.length} for s in self.sources],
            "totals": self.totals,
            "ranges": {k: [list(r) for r in v] for k, v in self.ranges.items()},
            "not_read": {s.name: [list(r) for r in nr.get(i, [])] for i, s in enumerate(self.sources)},
            "not_in_output": {s.name: [list(r) for r in nio.get(i, [])] for i, s in enumerate(self.sources)},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BlindSpotReport":
        sources = [SourceInfo(s["name"], int(s["length"])) for s in doc["sources"]]
        ids = {s.name: i for i, s in enumerate(sources)}

        def expand(section: dict) -> Set[SourceOffset]:
            out = set()
            for name, ranges in section.items():
                for start, end in ranges:
                    out.update(SourceOffset(ids[name], off) for off in range(start, end))
            return out

        if "not_read" in doc or "not_in_output" in doc:
            not_read = expand(doc.get("not_read", {}))
            not_in_output = expand(doc.get("not_in_output", {}))
            # hand-edited reports may list extra ranges only under "ranges"
            extra = expand(doc.get("ranges", {})) - not_read - not_in_output
            return cls(sources, not_read, not_in_output | extra)
        return cls(sources, set(), expand(doc["ranges"]))

    def csv_rows(self) -> List[Tuple[str, int, int, int, str]]:
        rows = []
        for category, offsets in (("not_read", self.not_read),
                                  ("not_in_output", self.not_in_output),
                                  ("blind_spot", self.blind_spots)):
            for sid, ranges in sorted(merge_ranges(offsets).items()):
                for start, end in ranges:
                    rows.append((self.sources[sid].name, start, end, end - start, category))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["source", "start", "end", "length", "category"])
        writer.writerows(self.csv_rows())
        return buf.getvalue()


def merge_ranges(offsets: Iterable[SourceOffset]) -> Dict[int, List[Range]]:
    """Group offsets by source into maximal sorted half-open intervals."""
    by_source: Dict[int, List[int]] = {}
    for sid, off in offsets:
        by_source.setdefault(sid, []).append(off)
    merged: Dict[int, List[Range]] = {}
    for sid in sorted(by_source):
        ranges: List[Range] = []
        start = prev = None
        for off in sorted(set(by_source[sid])):
            if prev is not None and off == prev + 1:
                prev = off
                continue
            if start is not None:
                ranges.append((start, prev + 1))
            start = prev = off
        ranges.append((start, prev + 1))
        merged[sid] = ranges
    return merged


def blind_spots(trace: TraceArtifact) -> BlindSpotReport:
    store = trace.labels
    n = len(store)
    kind = store.kinds
    pa = store.field_a
    pb = store.field_b

    # B as a flag array: 1 iff the label has not (yet) been excluded
    keep = store.flags.translate(_KEEP_UNMARKED)

    in_omega = bytearray(n + 1)
    for ev in trace.outputs:
        in_omega[ev.label] = 1

    inspections = 0
    removals = 0
    for label in range(n, 0, -1):
        inspections += 1
        if not keep[label] or in_omega[label]:
            keep[label] = 0
            if kind[label] != CANONICAL:
                keep[pa[label]] = 0
                keep[pb[label]] = 0
                removals += 2

    not_in_output = {
        SourceOffset(pa[label], pb[label])
        for label in range(1, n + 1)
        if keep[label] and kind[label] == CANONICAL
    }
    not_read = {
        SourceOffset(sid, off)
        for sid, src in enumerate(trace.sources)
        for off in range(src.length)
        if off not in trace.read_sets[sid]
    }
    return BlindSpotReport(list(trace.sources), not_read, not_in_output,
                           SweepCounters(inspections, removals))


def source_sink_map(trace: TraceArtifact) -> List[Set[SourceOffset]]:
    """For each output event, the input offsets its label descends from."""
    store = trace.labels
    kind, fa, fb = store.kinds, store.field_a, store.field_b
    memo: Dict[int, frozenset] = {0: frozenset()}

    def closure(root: int) -> frozenset:
        stack = [root]
        while stack:
            label = stack[-1]
            if label in memo:
                stack.pop()
                continue
            if kind[label] == CANONICAL:
                memo[label] = frozenset({SourceOffset(fa[label], fb[label])})
                stack.pop()
                continue
            pending = [p for p in (fa[label], fb[label]) if p not in memo]
            if pending:
                stack.extend(pending)
            else:
                memo[label] = memo[fa[label]] | memo[fb[label]]
                stack.pop()
        return memo[root]

    return [set(closure(ev.label)) for ev in trace.outputs]


def report_json(report: BlindSpotReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
