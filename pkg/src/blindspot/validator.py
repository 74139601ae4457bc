"""Mutation testing of blind-spot classifications.

Every byte reported as a blind spot is mutated (exhaustively or by seeded
sampling) and the uninstrumented program is re-run; any change in output
bytes or termination status is a false positive. A seeded sample of the
remaining read bytes is mutated the same way to bound missed detections:
a byte outside the blind spots whose sampled mutations all leave the run
unchanged is only a *candidate* miss, since untried values may still matter.

Random draws happen in a fixed order so that a seed pins the whole report:
first (sampled mode only) the values for each blind byte in (source, offset)
order, then the choice of outside bytes, then the values for each chosen
outside byte in (source, offset) order.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import List, Mapping, Set, Tuple

from .analyzer import BlindSpotReport
from .artifact import Status
from .interpreter import DEFAULT_STEP_LIMIT, Executable, Program
from .label_store import SourceOffset
from .rng import XorShift64Star

MODES = ("exhaustive", "sampled")
DEFAULT_SAMPLES = 8
DEFAULT_OUTSIDE = 256
DEFAULT_ORACLE_BUDGET = 256


class ValidationConfigError(ValueError):
    """Inputs do not match the report, or an option is out of range."""


class BudgetExceeded(ValidationConfigError):
    pass


@dataclass
class ValidationReport:
    type1_violations: List[Tuple[str, int, int]]
    blind_bytes_tested: int
    type2_candidates: List[Tuple[str, int]]
    outside_bytes_sampled: int
    seed: int
    mode: str
    samples: int
    fp_rate: float = field(init=False)
    fn_bound: float = field(init=False)

    def __post_init__(self) -> None:
        bad_offsets = {(s, o) for s, o, _ in self.type1_violations}
        self.fp_rate = len(bad_offsets) / self.blind_bytes_tested if self.blind_bytes_tested else 0.0
        self.fn_bound = (len(self.type2_candidates) / self.outside_bytes_sampled
                         if self.outside_bytes_sampled else 0.0)

    @property
    def ok(self) -> bool:
        return not self.type1_violations

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["type1_violations"] = [
            {"source": s, "offset": o, "value": v} for s, o, v in self.type1_violations
        ]
        doc["type2_candidates"] = [{"source": s, "offset": o} for s, o in self.type2_candidates]
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


class _Mutator:
    """Re-runs the program with one byte replaced and compares to baseline."""

    def __init__(self, program: Program, names: List[str], inputs: Mapping[str, bytes],
                 step_limit: int) -> None:
        self.exe = Executable(program, names, step_limit)
        self.data = [bytes(inputs[n]) for n in names]
        self.baseline = self.exe(self.data)
        self.runs = 0

    def differs(self, sid: int, offset: int, value: int) -> bool:
        buf = bytearray(self.data[sid])
        buf[offset] = value
        data = list(self.data)
        data[sid] = bytes(buf)
        self.runs += 1
        return self.exe(data) != self.baseline

    def others(self, sid: int, offset: int) -> List[int]:
        original = self.data[sid][offset]
        return [v for v in range(256) if v != original]


def _check_inputs(report: BlindSpotReport, inputs: Mapping[str, bytes]) -> None:
    declared = {s.name: s.length for s in report.sources}
    bound = {n: len(d) for n, d in inputs.items()}
    if declared != bound:
        raise ValidationConfigError(
            f"inputs {bound} do not match the report's sources {declared}")


def validate(
    program: Program,
    inputs: Mapping[str, bytes],
    report: BlindSpotReport,
    mode: str = "exhaustive",
    seed: int = 0,
    samples: int = DEFAULT_SAMPLES,
    outside: int = DEFAULT_OUTSIDE,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> ValidationReport:
    if mode not in MODES:
        raise ValidationConfigError(f"unknown mode {mode!r}")
    if samples < 1 or outside < 0:
        raise ValidationConfigError("samples must be >= 1 and outside >= 0")
    _check_inputs(report, inputs)

    names = [s.name for s in report.sources]
    mut = _Mutator(program, names, inputs, step_limit)
    rng = XorShift64Star(seed)

    blind = sorted(report.blind_spots)
    violations: List[Tuple[str, int, int]] = []
    for sid, off in blind:
        values = mut.others(sid, off)
        if mode == "sampled":
            values = sorted(rng.sample(values, samples))
        for value in values:
            if mut.differs(sid, off, value):
                violations.append((names[sid], off, value))

    blind_set = set(blind)
    candidates = [
        SourceOffset(sid, off)
        for sid in range(len(names))
        for off in range(len(mut.data[sid]))
        if (sid, off) not in blind_set
    ]
    chosen = sorted(rng.sample(candidates, min(outside, len(candidates))))
    type2: List[Tuple[str, int]] = []
    for sid, off in chosen:
        values = rng.sample(mut.others(sid, off), samples)
        if not any(mut.differs(sid, off, v) for v in values):
            type2.append((names[sid], off))

    return ValidationReport(
        type1_violations=violations,
        blind_bytes_tested=len(blind),
        type2_candidates=type2,
        outside_bytes_sampled=len(chosen),
        seed=seed,
        mode=mode,
        samples=samples,
    )


def oracle_blind_spots(
    program: Program,
    inputs: Mapping[str, bytes],
    budget: int = DEFAULT_ORACLE_BUDGET,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> Set[SourceOffset]:
    """Offsets where every single-byte mutation leaves output and status unchanged.

    Source ids follow the iteration order of ``inputs``. Single-byte
    mutability is necessary for a true blind spot but not sufficient.
    """
    total = sum(len(d) for d in inputs.values())
    if total > budget:
        raise BudgetExceeded(f"{total} input bytes exceed the oracle budget of {budget}")
    names = list(inputs)
    mut = _Mutator(program, names, inputs, step_limit)
    found: Set[SourceOffset] = set()
    for sid, name in enumerate(names):
        for off in range(len(mut.data[sid])):
            if not any(mut.differs(sid, off, v) for v in mut.others(sid, off)):
                found.add(SourceOffset(sid, off))
    return found


def baseline(program: Program, inputs: Mapping[str, bytes],
             step_limit: int = DEFAULT_STEP_LIMIT) -> Tuple[bytes, Status]:
    names = list(inputs)
    return Executable(program, names, step_limit)([bytes(inputs[n]) for n in names])
