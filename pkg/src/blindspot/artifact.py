"""In-memory execution record shared by the interpreter, trace format and analyzer."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Set

from .label_store import LabelStore, SourceOffset


class Status(enum.Enum):
    HALTED = "halted"
    ASSERT_FAILED = "assert-failed"
    STEP_LIMIT = "step-limit"
    RUNTIME_ERROR = "runtime-error"


class SourceInfo(NamedTuple):
    name: str
    length: int


class OutputEvent(NamedTuple):
    position: int
    value: int
    label: int


@dataclass
class TraceArtifact:
    """Labels, bound sources, bytes consumed per source, and output events.

    ``status`` and ``error`` describe how the run ended. They are not part of
    the on-disk layout and are ignored by equality.
    """

    labels: LabelStore
    sources: List[SourceInfo]
    read_sets: List[Set[int]]
    outputs: List[OutputEvent]
    status: Optional[Status] = field(default=None, compare=False)
    error: Optional[str] = field(default=None, compare=False)

    @property
    def output_bytes(self) -> bytes:
        return bytes(ev.value for ev in self.outputs)

    @property
    def omega(self) -> Set[int]:
        return {ev.label for ev in self.outputs}

    def source_id(self, name: str) -> int:
        for i, src in enumerate(self.sources):
            if src.name == name:
                return i
        raise KeyError(name)

    def read_offsets(self) -> Set[SourceOffset]:
        return {
            SourceOffset(sid, off)
            for sid, offsets in enumerate(self.read_sets)
            for off in offsets
        }
