import json

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from blindspot.analyzer import BlindSpotReport, blind_spots, merge_ranges, report_json, source_sink_map
from blindspot.artifact import OutputEvent
from blindspot.interpreter import RunConfig, parse_program, run
from blindspot.label_store import SourceOffset as S

from strategies import artifacts, programs


def brute_force_blind(trace):
    """Materialise psi for every output and CF-marked label, then subtract."""
    store = trace.labels
    roots = trace.omega | {l for l, _k, flags, _a, _b in store.records() if flags & 1}
    reached = set()
    for label in roots:
        reached |= store.sources(label)
    read = {store.canonical(l) for l, *_ in store.records() if store.is_canonical(l)}
    unread = {S(i, off) for i, src in enumerate(trace.sources)
              for off in range(src.length) if off not in trace.read_sets[i]}
    return unread | (read - reached)


def has_observed_descendant(trace, offset):
    """Forward search from the offset's canonical label to an output or CF-marked label."""
    store = trace.labels
    children = {}
    start = None
    for label, kind, flags, a, b in store.records():
        if store.is_canonical(label):
            if (a, b) == tuple(offset):
                start = label
        else:
            children.setdefault(a, []).append(label)
            children.setdefault(b, []).append(label)
    omega = trace.omega
    stack, seen = [start], {start}
    while stack:
        label = stack.pop()
        if label in omega or store.affects_cf(label):
            return True
        for child in children.get(label, ()):
            if child not in seen:
                seen.add(child)
                stack.append(child)
    return False


def test_threshold_has_no_blind_spots(alg1):
    trace, _ = run(alg1, RunConfig({"in": bytes([40, 12])}))
    report = blind_spots(trace)
    assert report.blind_spots == set()
    assert report.ranges == {"in": []}


def test_threshold_untaken_branch_still_no_blind_spots(alg1):
    trace, _ = run(alg1, RunConfig({"in": bytes([10, 12])}))
    assert blind_spots(trace).blind_spots == set()


def test_skip_parser(skip_parser):
    trace, _ = run(skip_parser, RunConfig({"in": b"abc"}))
    report = blind_spots(trace)
    assert report.not_in_output == {S(0, 1)}
    assert report.not_read == {S(0, 2)}
    assert report.blind_spots == {S(0, 1), S(0, 2)}
    assert report.ranges == {"in": [(1, 3)]}
    assert report.totals == {"not_read": 1, "not_in_output": 1, "blind_spot": 2}


def test_no_reads():
    trace, _ = run(parse_program("halt"), RunConfig({"in": b"abcd"}))
    report = blind_spots(trace)
    assert report.ranges == {"in": [(0, 4)]}
    assert report.not_read == report.blind_spots
    assert report.not_in_output == set()


@pytest.mark.parametrize("offsets,expected", [
    ({1, 2, 3, 7}, [(1, 4), (7, 8)]),
    (set(), []),
    ({0}, [(0, 1)]),
])
def test_merge_ranges(offsets, expected):
    merged = merge_ranges({S(0, o) for o in offsets})
    assert merged.get(0, []) == expected


def test_merge_ranges_multiple_sources():
    assert merge_ranges({S(1, 4), S(0, 2), S(1, 5), S(0, 0)}) == {0: [(0, 1), (2, 3)], 1: [(4, 6)]}


def test_source_sink_map(alg1, copy_through):
    trace, _ = run(alg1, RunConfig({"in": bytes([40, 12])}))
    assert source_sink_map(trace) == [{S(0, 0), S(0, 1)}]
    trace, _ = run(copy_through, RunConfig({"in": b"\x07"}))
    assert source_sink_map(trace) == [{S(0, 0)}]
    trace, _ = run(parse_program('x := get_input("in")\noutput(1)\nhalt'), RunConfig({"in": b"\x07"}))
    assert source_sink_map(trace) == [set()]


def test_counters_on_threshold(alg1):
    trace, _ = run(alg1, RunConfig({"in": bytes([40, 12])}))
    c = blind_spots(trace).counters
    assert c.inspections == 3
    assert c.removals == 2


def test_report_json_round_trip(skip_parser):
    trace, _ = run(skip_parser, RunConfig({"in": b"abcdef"}))
    report = blind_spots(trace)
    doc = json.loads(report_json(report))
    assert doc["ranges"] == {"in": [[1, 6]]}
    assert doc["not_read"] == {"in": [[2, 6]]}
    assert doc["totals"]["blind_spot"] == 5
    assert BlindSpotReport.from_json(doc) == report


def test_report_from_ranges_only():
    doc = {"sources": [{"name": "in", "length": 4}], "ranges": {"in": [[0, 2]]}}
    report = BlindSpotReport.from_json(doc)
    assert report.blind_spots == {S(0, 0), S(0, 1)}


def test_report_csv(skip_parser):
    trace, _ = run(skip_parser, RunConfig({"in": b"abc"}))
    lines = blind_spots(trace).to_csv().splitlines()
    assert lines == [
        "source,start,end,length,category",
        "in,2,3,1,not_read",
        "in,1,2,1,not_in_output",
        "in,1,3,2,blind_spot",
    ]


@settings(max_examples=300, deadline=None)
@given(artifacts())
def test_sweep_matches_brute_force_on_random_stores(trace):
    report = blind_spots(trace)
    assert report.blind_spots == brute_force_blind(trace)
    n = len(trace.labels)
    assert report.counters.inspections <= n
    assert report.counters.removals <= 2 * n


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(programs(), st.binary(max_size=10), st.sampled_from(["accumulate", "off"]))
def test_sweep_matches_brute_force_on_runs(program, data, policy):
    trace, _ = run(program, RunConfig({"in": data}, cf_policy=policy))
    report = blind_spots(trace)
    assert report.blind_spots == brute_force_blind(trace)
    for off in trace.read_offsets() - report.blind_spots:
        assert has_observed_descendant(trace, off)
    for off in report.not_in_output:
        assert not has_observed_descendant(trace, off)


@settings(max_examples=100, deadline=None)
@given(artifacts())
def test_source_sink_map_matches_psi(trace):
    mapped = source_sink_map(trace)
    assert mapped == [trace.labels.sources(ev.label) for ev in trace.outputs]


def test_omega_membership_excludes_parents():
    trace, _ = run(parse_program('a := get_input("in")\nb := get_input("in")\nc := a + b\nhalt'),
                   RunConfig({"in": b"xyz"}))
    assert blind_spots(trace).not_in_output == {S(0, 0), S(0, 1)}
    trace.outputs.append(OutputEvent(0, 0, 3))
    assert blind_spots(trace).not_in_output == set()
