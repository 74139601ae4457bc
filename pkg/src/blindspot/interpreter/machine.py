"""Instrumented and plain evaluation of parsed programs.

``run`` executes a program while propagating taint labels and returns a
:class:`TraceArtifact`. ``compile_program`` builds a closure-based executor
with no taint bookkeeping; the validator re-runs mutated inputs through it.
Both paths share the value operations below, so they cannot disagree on
program output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

from ..artifact import OutputEvent, SourceInfo, Status, TraceArtifact
from ..label_store import LabelStore, SourceOffset
from .syntax import (
    INT64_MIN,
    UINT64_MAX,
    Assert,
    Assign,
    BinOp,
    CondGoto,
    Const,
    Expr,
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

DEFAULT_STEP_LIMIT = 10_000_000
CF_POLICIES = ("accumulate", "off")


class ConfigError(ValueError):
    """Run configuration does not fit the program (e.g. unbound source)."""


class Fault(Exception):
    """Runtime error raised while evaluating; ends the run with a status."""


def wrap64(value: int) -> int:
    return ((value - INT64_MIN) & UINT64_MAX) + INT64_MIN


def _div(a: int, b: int) -> int:
    if b == 0:
        raise Fault("division by zero")
    q = abs(a) // abs(b)
    return wrap64(q if (a < 0) == (b < 0) else -q)


def _mod(a: int, b: int) -> int:
    if b == 0:
        raise Fault("modulo by zero")
    q = abs(a) // abs(b)
    q = q if (a < 0) == (b < 0) else -q
    return wrap64(a - b * q)


BINOP_FUNCS: Dict[str, Callable[[int, int], int]] = {
    "+": lambda a, b: wrap64(a + b),
    "-": lambda a, b: wrap64(a - b),
    "*": lambda a, b: wrap64(a * b),
    "/": _div,
    "%": _mod,
    "&": lambda a, b: a & b,
    "|": lambda a, b: a | b,
    "^": lambda a, b: a ^ b,
    "<<": lambda a, b: wrap64(a << (b & 63)),
    ">>": lambda a, b: a >> (b & 63),
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    "<": lambda a, b: int(a < b),
    "<=": lambda a, b: int(a <= b),
    ">": lambda a, b: int(a > b),
    ">=": lambda a, b: int(a >= b),
}

UNOP_FUNCS: Dict[str, Callable[[int], int]] = {
    "-": lambda a: wrap64(-a),
    "~": lambda a: ~a,
    "!": lambda a: int(a == 0),
}

# a zero divisor changes termination status, so the divisor steers control flow
_FALLIBLE_OPS = frozenset({"/", "%"})


@dataclass
class RunConfig:
    inputs: Mapping[str, bytes] = field(default_factory=dict)
    cf_policy: str = "accumulate"
    step_limit: int = DEFAULT_STEP_LIMIT

    def __post_init__(self) -> None:
        if self.cf_policy not in CF_POLICIES:
            raise ConfigError(f"unknown control-flow policy {self.cf_policy!r}")
        if self.step_limit <= 0:
            raise ConfigError("step limit must be positive")


def _check_sources(program: Program, inputs: Mapping[str, bytes]) -> None:
    missing = sorted(program.input_sources() - set(inputs))
    if missing:
        raise ConfigError(f"unbound input source(s): {', '.join(missing)}")


class _TaintMachine:
    def __init__(self, program: Program, cfg: RunConfig) -> None:
        self.program = program
        self.names = list(cfg.inputs)
        self.data = [bytes(cfg.inputs[n]) for n in self.names]
        self.index = {n: i for i, n in enumerate(self.names)}
        self.cursors = [0] * len(self.names)
        self.read_sets: List[set] = [set() for _ in self.names]
        self.store = LabelStore([len(d) for d in self.data])
        self.accumulate = cfg.cf_policy == "accumulate"
        self.step_limit = cfg.step_limit
        self.env: Dict[str, Tuple[int, int]] = {}
        self.mem: Dict[int, Tuple[int, int]] = {}
        self.outputs: List[OutputEvent] = []
        self.cf = 0

    def fold(self, label: int) -> int:
        if self.accumulate and self.cf:
            return self.store.union(label, self.cf)
        return label

    def steer(self, label: int) -> None:
        """Record that ``label`` decided which way execution went."""
        if label:
            self.store.mark_affects_cf(label)
            if self.accumulate:
                self.cf = self.store.union(self.cf, label)

    def eval(self, e: Expr) -> Tuple[int, int]:
        if isinstance(e, Const):
            return e.value, 0
        if isinstance(e, Var):
            try:
                return self.env[e.name]
            except KeyError:
                raise Fault(f"undefined variable {e.name!r}") from None
        if isinstance(e, BinOp):
            a, la = self.eval(e.left)
            b, lb = self.eval(e.right)
            if e.op in _FALLIBLE_OPS and lb:
                self.store.mark_affects_cf(lb)
            value = BINOP_FUNCS[e.op](a, b)
            return value, self.fold(self.store.union(la, lb))
        if isinstance(e, UnOp):
            a, la = self.eval(e.operand)
            return UNOP_FUNCS[e.op](a), self.fold(la)
        if isinstance(e, Load):
            addr, la = self.eval(e.addr)
            value, lc = self.mem.get(addr, (0, 0))
            return value, self.fold(self.store.union(lc, la))
        if isinstance(e, GetInput):
            sid = self.index[e.source]
            cur = self.cursors[sid]
            if cur >= len(self.data[sid]):
                raise Fault(f"input {e.source!r} exhausted at offset {cur}")
            self.cursors[sid] = cur + 1
            self.read_sets[sid].add(cur)
            label = self.store.create_canonical(SourceOffset(sid, cur))
            return self.data[sid][cur], self.fold(label)
        raise TypeError(f"not an expression: {e!r}")

    def execute(self) -> Tuple[Status, Optional[str]]:
        statements = self.program.statements
        n = len(statements)
        pc = 0
        steps = 0
        try:
            while True:
                if not 0 <= pc < n:
                    return Status.RUNTIME_ERROR, f"pc {pc} out of range"
                if steps >= self.step_limit:
                    return Status.STEP_LIMIT, f"step limit {self.step_limit} reached"
                steps += 1
                s = statements[pc]
                pc += 1
                if isinstance(s, Assign):
                    value, label = self.eval(s.expr)
                    self.env[s.name] = (value, self.fold(label))
                elif isinstance(s, CondGoto):
                    value, label = self.eval(s.cond)
                    self.steer(label)
                    pc = s.target_true if value != 0 else s.target_false
                elif isinstance(s, Output):
                    value, label = self.eval(s.expr)
                    self.outputs.append(OutputEvent(len(self.outputs), value & 0xFF, label))
                elif isinstance(s, Store):
                    addr, la = self.eval(s.addr)
                    value, lv = self.eval(s.value)
                    if la:
                        self.store.mark_affects_cf(la)
                    self.mem[addr] = (value & 0xFF, self.fold(self.store.union(lv, la)))
                elif isinstance(s, Goto):
                    value, label = self.eval(s.target)
                    self.steer(label)
                    pc = value
                elif isinstance(s, Assert):
                    value, label = self.eval(s.expr)
                    self.steer(label)
                    if value == 0:
                        return Status.ASSERT_FAILED, f"assertion at statement {pc - 1} failed"
                elif isinstance(s, Halt):
                    return Status.HALTED, None
                else:
                    raise TypeError(f"not a statement: {s!r}")
        except Fault as exc:
            return Status.RUNTIME_ERROR, str(exc)


def run(program: Program, cfg: RunConfig) -> Tuple[TraceArtifact, bytes]:
    """Execute ``program`` with taint tracking.

    Runtime faults end the run early; the returned trace still covers
    everything that executed and carries the final status.
    """
    _check_sources(program, cfg.inputs)
    m = _TaintMachine(program, cfg)
    status, error = m.execute()
    trace = TraceArtifact(
        labels=m.store,
        sources=[SourceInfo(n, len(d)) for n, d in zip(m.names, m.data)],
        read_sets=m.read_sets,
        outputs=m.outputs,
        status=status,
        error=error,
    )
    return trace, trace.output_bytes


# -- plain execution ---------------------------------------------------------

class _Ctx:
    __slots__ = ("env", "mem", "data", "cursors", "out")

    def __init__(self, data: List[bytes]) -> None:
        self.env: Dict[str, int] = {}
        self.mem: Dict[int, int] = {}
        self.data = data
        self.cursors = [0] * len(data)
        self.out = bytearray()


class _Stop(Exception):
    def __init__(self, status: Status) -> None:
        self.status = status


def _compile_expr(e: Expr, index: Mapping[str, int]) -> Callable[[_Ctx], int]:
    if isinstance(e, Const):
        v = e.value
        return lambda ctx: v
    if isinstance(e, Var):
        name = e.name

        def var(ctx: _Ctx) -> int:
            try:
                return ctx.env[name]
            except KeyError:
                raise Fault(f"undefined variable {name!r}") from None
        return var
    if isinstance(e, BinOp):
        f = BINOP_FUNCS[e.op]
        left = _compile_expr(e.left, index)
        right = _compile_expr(e.right, index)
        if isinstance(e.right, Const) and e.op not in _FALLIBLE_OPS:
            v = e.right.value
            return lambda ctx: f(left(ctx), v)
        return lambda ctx: f(left(ctx), right(ctx))
    if isinstance(e, UnOp):
        g = UNOP_FUNCS[e.op]
        operand = _compile_expr(e.operand, index)
        return lambda ctx: g(operand(ctx))
    if isinstance(e, Load):
        addr = _compile_expr(e.addr, index)
        return lambda ctx: ctx.mem.get(addr(ctx), 0)
    if isinstance(e, GetInput):
        sid = index[e.source]
        src = e.source

        def get_input(ctx: _Ctx) -> int:
            cur = ctx.cursors[sid]
            data = ctx.data[sid]
            if cur >= len(data):
                raise Fault(f"input {src!r} exhausted at offset {cur}")
            ctx.cursors[sid] = cur + 1
            return data[cur]
        return get_input
    raise TypeError(f"not an expression: {e!r}")


def _compile_stmt(s, index: Mapping[str, int]) -> Callable[[_Ctx, int], int]:
    """Each compiled statement takes (ctx, next_pc) and returns the new pc."""
    if isinstance(s, Assign):
        name = s.name
        ev = _compile_expr(s.expr, index)

        def assign(ctx, nxt):
            ctx.env[name] = ev(ctx)
            return nxt
        return assign
    if isinstance(s, CondGoto):
        ev = _compile_expr(s.cond, index)
        t, f = s.target_true, s.target_false
        return lambda ctx, nxt: t if ev(ctx) != 0 else f
    if isinstance(s, Output):
        ev = _compile_expr(s.expr, index)

        def output(ctx, nxt):
            ctx.out.append(ev(ctx) & 0xFF)
            return nxt
        return output
    if isinstance(s, Store):
        ea = _compile_expr(s.addr, index)
        ev = _compile_expr(s.value, index)

        def store(ctx, nxt):
            addr = ea(ctx)
            ctx.mem[addr] = ev(ctx) & 0xFF
            return nxt
        return store
    if isinstance(s, Goto):
        ev = _compile_expr(s.target, index)
        return lambda ctx, nxt: ev(ctx)
    if isinstance(s, Assert):
        ev = _compile_expr(s.expr, index)

        def check(ctx, nxt):
            if ev(ctx) == 0:
                raise _Stop(Status.ASSERT_FAILED)
            return nxt
        return check
    if isinstance(s, Halt):
        def halt(ctx, nxt):
            raise _Stop(Status.HALTED)
        return halt
    raise TypeError(f"not a statement: {s!r}")


class Executable:
    """A program compiled for repeated uninstrumented runs."""

    def __init__(self, program: Program, source_names: List[str],
                 step_limit: int = DEFAULT_STEP_LIMIT) -> None:
        missing = sorted(program.input_sources() - set(source_names))
        if missing:
            raise ConfigError(f"unbound input source(s): {', '.join(missing)}")
        if step_limit <= 0:
            raise ConfigError("step limit must be positive")
        self.source_names = list(source_names)
        index = {n: i for i, n in enumerate(self.source_names)}
        self._code = [_compile_stmt(s, index) for s in program.statements]
        self.step_limit = step_limit

    def __call__(self, data: List[bytes]) -> Tuple[bytes, Status]:
        """Run on one byte string per source, in ``source_names`` order."""
        code = self._code
        n = len(code)
        limit = self.step_limit
        ctx = _Ctx(data)
        pc = 0
        steps = 0
        try:
            while 0 <= pc < n:
                if steps >= limit:
                    return bytes(ctx.out), Status.STEP_LIMIT
                steps += 1
                pc = code[pc](ctx, pc + 1)
            return bytes(ctx.out), Status.RUNTIME_ERROR
        except _Stop as stop:
            return bytes(ctx.out), stop.status
        except Fault:
            return bytes(ctx.out), Status.RUNTIME_ERROR


def compile_program(program: Program, source_names: List[str],
                    step_limit: int = DEFAULT_STEP_LIMIT) -> Executable:
    return Executable(program, source_names, step_limit)


def execute(program: Program, inputs: Mapping[str, bytes],
            step_limit: int = DEFAULT_STEP_LIMIT) -> Tuple[bytes, Status]:
    """Uninstrumented run; returns program output and final status."""
    exe = Executable(program, list(inputs), step_limit)
    return exe([bytes(inputs[n]) for n in exe.source_names])
