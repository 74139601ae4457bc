"""Append-only taint label store.

Every label is one fixed-size record: either *canonical* (the label was
created by reading one input byte, and the record holds that byte's source
and offset) or *union* (the label was created by mixing two labelled values,
and the record holds the two parent ids). Because parents always have
smaller ids than their children, the records form a DAG that can be swept
in a single descending pass.

Label 0 is reserved for "untainted" and never has a record.
"""
from __future__ import annotations

from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

MAX_LABEL = 2**32 - 1

CANONICAL = 1
UNION = 2

AFFECTS_CF = 0x01


class SourceOffset(NamedTuple):
    source: int
    offset: int


class LabelError(RuntimeError):
    """Fatal analysis error: unknown label, bad offset, or id overflow."""


class LabelStore:
    """Canonical/union label records indexed densely from 1.

    Record fields live in parallel arrays so that a store with millions of
    labels stays compact and can be loaded straight from a trace file.
    For canonical records ``field_a`` is the source id and ``field_b`` the
    byte offset; for union records they are the two parents with
    ``field_a < field_b``.
    """

    def __init__(self, source_lengths: Optional[Sequence[int]] = None) -> None:
        # index 0 is a placeholder for the reserved untainted label
        self._kind = bytearray(1)
        self._flags = bytearray(1)
        self._a: List[int] = [0]
        self._b: List[int] = [0]
        self._source_lengths = list(source_lengths) if source_lengths is not None else None
        self._union_cache: Optional[Dict[Tuple[int, int], int]] = {}

    @classmethod
    def from_arrays(
        cls,
        kind: bytes,
        flags: bytes,
        field_a: List[int],
        field_b: List[int],
        source_lengths: Optional[Sequence[int]] = None,
    ) -> "LabelStore":
        """Build a store from per-record arrays (label 1 at index 0).

        The union dedup cache is rebuilt lazily if more unions are added.
        """
        store = cls(source_lengths)
        store._kind = bytearray(1) + bytearray(kind)
        store._flags = bytearray(1) + bytearray(flags)
        store._a = [0]
        store._a.extend(field_a)
        store._b = [0]
        store._b.extend(field_b)
        store._union_cache = None
        return store

    def __len__(self) -> int:
        return len(self._kind) - 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelStore):
            return NotImplemented
        return (
            self._kind == other._kind
            and self._flags == other._flags
            and self._a == other._a
            and self._b == other._b
        )

    def __repr__(self) -> str:
        return f"LabelStore({len(self)} labels)"

    # -- construction -----------------------------------------------------

    def _append(self, kind: int, a: int, b: int) -> int:
        label = len(self._kind)
        if label > MAX_LABEL:
            raise LabelError("taint label space exhausted")
        self._kind.append(kind)
        self._flags.append(0)
        self._a.append(a)
        self._b.append(b)
        return label

    def _check(self, label: int) -> None:
        if label < 0 or label >= len(self._kind):
            raise LabelError(f"unknown taint label {label}")

    def create_canonical(self, src: SourceOffset) -> int:
        source, offset = src
        if offset < 0:
            raise LabelError(f"negative offset {offset}")
        if self._source_lengths is not None:
            if not 0 <= source < len(self._source_lengths):
                raise LabelError(f"unknown source id {source}")
            if offset >= self._source_lengths[source]:
                raise LabelError(
                    f"offset {offset} outside source {source} "
                    f"of length {self._source_lengths[source]}"
                )
        return self._append(CANONICAL, source, offset)

    def union(self, a: int, b: int) -> int:
        self._check(a)
        self._check(b)
        if a == b or b == 0:
            return a
        if a == 0:
            return b
        key = (a, b) if a < b else (b, a)
        cache = self._union_cache
        if cache is None:
            cache = self._union_cache = {
                (self._a[i], self._b[i]): i
                for i in range(1, len(self._kind))
                if self._kind[i] == UNION
            }
        label = cache.get(key)
        if label is None:
            label = self._append(UNION, key[0], key[1])
            cache[key] = label
        return label

    def union_many(self, labels: Iterable[int]) -> int:
        result = 0
        for label in labels:
            result = self.union(result, label)
        return result

    def mark_affects_cf(self, label: int) -> None:
        if label == 0:
            return
        self._check(label)
        self._flags[label] |= AFFECTS_CF

    # -- queries ------------------------------------------------------------

    def affects_cf(self, label: int) -> bool:
        self._check(label)
        return bool(self._flags[label] & AFFECTS_CF)

    def is_canonical(self, label: int) -> bool:
        self._check(label)
        return self._kind[label] == CANONICAL

    def is_union(self, label: int) -> bool:
        self._check(label)
        return self._kind[label] == UNION

    def canonical(self, label: int) -> SourceOffset:
        """The kappa entry of a canonical label."""
        if not self.is_canonical(label):
            raise LabelError(f"label {label} is not canonical")
        return SourceOffset(self._a[label], self._b[label])

    def parents(self, label: int) -> Tuple[int, int]:
        """The gamma entry of a union label."""
        if not self.is_union(label):
            raise LabelError(f"label {label} is not a union")
        return self._a[label], self._b[label]

    def is_tainted(self, label: int) -> bool:
        if label == 0:
            return False
        self._check(label)
        return True

    def sources(self, label: int) -> Set[SourceOffset]:
        """All canonical source offsets reachable from ``label``."""
        self._check(label)
        found: Set[SourceOffset] = set()
        if label == 0:
            return found
        kind, fa, fb = self._kind, self._a, self._b
        seen = {label}
        stack = [label]
        while stack:
            cur = stack.pop()
            if kind[cur] == CANONICAL:
                found.add(SourceOffset(fa[cur], fb[cur]))
                continue
            for parent in (fa[cur], fb[cur]):
                if parent and parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
        return found

    def records(self):
        """Yield ``(label, kind, flags, field_a, field_b)`` for every record."""
        for i in range(1, len(self._kind)):
            yield i, self._kind[i], self._flags[i], self._a[i], self._b[i]

    # raw arrays for bulk consumers (analyzer, trace writer); index 0 is padding
    @property
    def kinds(self) -> bytearray:
        return self._kind

    @property
    def flags(self) -> bytearray:
        return self._flags

    @property
    def field_a(self) -> List[int]:
        return self._a

    @property
    def field_b(self) -> List[int]:
        return self._b
