"""Hypothesis strategies for random terminating programs and label stores."""
from __future__ import annotations

from hypothesis import strategies as st

from blindspot.artifact import OutputEvent, SourceInfo, TraceArtifact
from blindspot.interpreter.syntax import (
    Assert,
    Assign,
    BinOp,
    CondGoto,
    Const,
    GetInput,
    Goto,
    Halt,
    Load,
    Output,
    Program,
    Store,
    UnOp,
    Var,
)
from blindspot.label_store import LabelStore, SourceOffset

VARS = ("a", "b", "c", "d")
SAFE_OPS = ("+", "-", "*", "&", "|", "^", "<<", ">>", "==", "!=", "<", "<=", ">", ">=")


def exprs(sources=("in",), depth=2):
    leaves = st.one_of(
        st.integers(-3, 300).map(Const),
        st.sampled_from(VARS).map(Var),
        st.sampled_from(sources).map(GetInput),
    )
    if depth == 0:
        return leaves
    sub = exprs(sources, depth - 1)
    return st.one_of(
        leaves,
        st.builds(BinOp, st.sampled_from(SAFE_OPS), sub, sub),
        st.builds(BinOp, st.sampled_from(("/", "%")), sub, sub),
        st.builds(UnOp, st.sampled_from(("-", "~", "!")), sub),
        st.builds(Load, sub),
    )


@st.composite
def programs(draw, sources=("in",), max_body=10):
    """Programs whose jumps only go forward, so every run terminates.

    All variables are initialised first; the body may read inputs, branch,
    use memory, divide (possibly by zero), assert, and write output.
    """
    body_len = draw(st.integers(1, max_body))
    start = len(VARS)
    end = start + body_len  # index of the final halt
    stmts = [Assign(v, Const(0)) for v in VARS]
    e = exprs(sources)
    for i in range(body_len):
        pc = start + i
        forward = st.integers(pc + 1, end)
        kind = draw(st.sampled_from(
            ("assign", "assign", "output", "output", "cond", "store", "goto", "assert", "halt")))
        if kind == "assign":
            stmts.append(Assign(draw(st.sampled_from(VARS)), draw(e)))
        elif kind == "output":
            stmts.append(Output(draw(e)))
        elif kind == "cond":
            stmts.append(CondGoto(draw(e), draw(forward), draw(forward)))
        elif kind == "store":
            stmts.append(Store(draw(e), draw(e)))
        elif kind == "goto":
            if draw(st.booleans()):
                stmts.append(Goto(Const(draw(forward))))
            else:
                # computed target, folded into the forward window [pc + 1, end]
                offset = BinOp("%", BinOp("&", draw(e), Const(0xFF)), Const(end - pc))
                stmts.append(Goto(BinOp("+", Const(pc + 1), offset)))
        elif kind == "assert":
            stmts.append(Assert(draw(e)))
        else:
            stmts.append(Halt())
    stmts.append(Halt())
    return Program(tuple(stmts))


@st.composite
def label_stores(draw, max_labels=60, n_sources=2, source_len=8):
    """Random stores built through the public API, with some CF marks."""
    store = LabelStore([source_len] * n_sources)
    ops = draw(st.lists(st.tuples(st.booleans(), st.integers(0, 10**6), st.integers(0, 10**6)),
                        max_size=max_labels))
    canon_used = set()
    for make_canonical, x, y in ops:
        n = len(store)
        if make_canonical or n == 0:
            src = SourceOffset(x % n_sources, y % source_len)
            if src in canon_used:
                continue
            canon_used.add(src)
            store.create_canonical(src)
        else:
            store.union(x % (n + 1), y % (n + 1))
    marks = draw(st.lists(st.integers(0, max(len(store), 0)), max_size=5))
    for m in marks:
        store.mark_affects_cf(m)
    return store


@st.composite
def artifacts(draw):
    """Random valid TraceArtifacts: canonical labels match the read set one-to-one."""
    n_sources = draw(st.integers(1, 3))
    store = draw(label_stores(n_sources=n_sources, source_len=8))
    names = draw(st.lists(st.text(min_size=0, max_size=6), min_size=n_sources,
                          max_size=n_sources, unique=True))
    lengths = [8 + draw(st.integers(0, 20)) for _ in range(n_sources)]
    read_sets = [set() for _ in range(n_sources)]
    for label, kind, _flags, a, b in store.records():
        if store.is_canonical(label):
            read_sets[a].add(b)
    labels = st.integers(0, len(store))
    events = draw(st.lists(st.tuples(st.integers(0, 255), labels), max_size=6))
    outputs = [OutputEvent(i, v, l) for i, (v, l) in enumerate(events)]
    sources = [SourceInfo(n, l) for n, l in zip(names, lengths)]
    return TraceArtifact(store, sources, read_sets, outputs)
