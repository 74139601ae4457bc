"""AST and line-oriented parser for the toy imperative language.

One statement per line; blank lines and ``#`` comments are skipped and do
not count towards statement indices, so ``goto 4`` jumps to the fifth
statement of the program.

    x := <expr>
    store(<addr>, <value>)
    goto <expr>
    if <expr> then goto <int> else goto <int>
    output(<expr>)
    assert(<expr>)
    halt

Expressions use C precedence. Literals are decimal, ``0x`` hex, or single
quoted characters (``'#'``, ``'\\n'``). ``load(e)`` reads a memory byte and
``get_input("src")`` consumes the next byte of a named input source.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Tuple, Union

INT64_MIN = -(2**63)
UINT64_MAX = 2**64 - 1

BINARY_OPS = ("+", "-", "*", "/", "%", "&", "|", "^", "<<", ">>",
              "==", "!=", "<", "<=", ">", ">=")
UNARY_OPS = ("-", "~", "!")

_PRECEDENCE = {
    "|": 1,
    "^": 2,
    "&": 3,
    "==": 4, "!=": 4,
    "<": 5, "<=": 5, ">": 5, ">=": 5,
    "<<": 6, ">>": 6,
    "+": 7, "-": 7,
    "*": 8, "/": 8, "%": 8,
}

KEYWORDS = frozenset({
    "if", "then", "else", "goto", "halt", "output", "assert", "store",
    "load", "get_input",
})


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Load:
    addr: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnOp:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class GetInput:
    source: str


Expr = Union[Const, Var, Load, BinOp, UnOp, GetInput]


# -- statements --------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    name: str
    expr: Expr


@dataclass(frozen=True)
class Store:
    addr: Expr
    value: Expr


@dataclass(frozen=True)
class Goto:
    target: Expr


@dataclass(frozen=True)
class CondGoto:
    cond: Expr
    target_true: int
    target_false: int


@dataclass(frozen=True)
class Output:
    expr: Expr


@dataclass(frozen=True)
class Assert:
    expr: Expr


@dataclass(frozen=True)
class Halt:
    pass


Stmt = Union[Assign, Store, Goto, CondGoto, Output, Assert, Halt]


@dataclass(frozen=True)
class Program:
    statements: Tuple[Stmt, ...]

    def __len__(self) -> int:
        return len(self.statements)

    def input_sources(self) -> FrozenSet[str]:
        """Names of every source referenced by a ``get_input`` call."""
        found = set()
        for stmt in self.statements:
            for expr in _stmt_exprs(stmt):
                _collect_sources(expr, found)
        return frozenset(found)


def _stmt_exprs(stmt: Stmt) -> List[Expr]:
    if isinstance(stmt, (Assign, Output, Assert)):
        return [stmt.expr]
    if isinstance(stmt, Store):
        return [stmt.addr, stmt.value]
    if isinstance(stmt, Goto):
        return [stmt.target]
    if isinstance(stmt, CondGoto):
        return [stmt.cond]
    return []


def _collect_sources(expr: Expr, found: set) -> None:
    if isinstance(expr, GetInput):
        found.add(expr.source)
    elif isinstance(expr, Load):
        _collect_sources(expr.addr, found)
    elif isinstance(expr, BinOp):
        _collect_sources(expr.left, found)
        _collect_sources(expr.right, found)
    elif isinstance(expr, UnOp):
        _collect_sources(expr.operand, found)


# -- parsing -----------------------------------------------------------------

class ParseError(ValueError):
    def __init__(self, line: int, column: int, message: str) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#.*)
  | (?P<number>[0-9][0-9A-Za-z_]*)
  | (?P<char>'(?:\\x[0-9A-Fa-f]{2}|\\.|[^\\'])')
  | (?P<string>"[^"\\]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|<<|>>|<=|>=|==|!=|[-+*/%&|^<>~!(),])
""", re.VERBOSE)

_CHAR_ESCAPES = {"n": 10, "r": 13, "t": 9, "0": 0, "\\": 92, "'": 39, '"': 34}


@dataclass
class _Token:
    kind: str
    text: str
    col: int
    value: Optional[int] = None


def _int_literal(text: str, line: int, col: int) -> int:
    try:
        if text[:2].lower() == "0x":
            value = int(text[2:], 16)
            if text[2:3] in ("", "_"):
                raise ValueError
        else:
            if not text.isdigit():
                raise ValueError
            value = int(text, 10)
    except ValueError:
        raise ParseError(line, col, f"bad integer literal {text!r}") from None
    if value > UINT64_MAX:
        raise ParseError(line, col, f"integer literal {text!r} exceeds 64 bits")
    return value


def _char_literal(text: str, line: int, col: int) -> int:
    body = text[1:-1]
    if body.startswith("\\x"):
        return int(body[2:], 16)
    if body.startswith("\\"):
        if body[1] not in _CHAR_ESCAPES:
            raise ParseError(line, col, f"unknown escape {body!r}")
        return _CHAR_ESCAPES[body[1]]
    code = ord(body)
    if code > 0x7F:
        raise ParseError(line, col, f"non-ASCII character literal {text!r}")
    return code


def _tokenize(text: str, line: int) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(line, pos + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        tok = m.group()
        col = pos + 1
        pos = m.end()
        if kind in ("ws", "comment"):
            continue
        if kind == "number":
            tokens.append(_Token("int", tok, col, _int_literal(tok, line, col)))
        elif kind == "char":
            tokens.append(_Token("int", tok, col, _char_literal(tok, line, col)))
        else:
            tokens.append(_Token(kind, tok, col))
    return tokens


def _wrap64(value: int) -> int:
    return ((value - INT64_MIN) & UINT64_MAX) + INT64_MIN


class _LineParser:
    def __init__(self, tokens: List[_Token], line: int, width: int) -> None:
        self.tokens = tokens
        self.pos = 0
        self.line = line
        self.width = width

    def error(self, message: str) -> ParseError:
        col = self.tokens[self.pos].col if self.pos < len(self.tokens) else self.width + 1
        return ParseError(self.line, col, message)

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of line")
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok is None or tok.text != text:
            found = "end of line" if tok is None else repr(tok.text)
            raise self.error(f"expected {text!r}, found {found}")
        self.pos += 1
        return tok

    def expect_int(self) -> int:
        tok = self.peek()
        if tok is None or tok.kind != "int":
            raise self.error("expected an integer statement index")
        self.pos += 1
        return tok.value

    def done(self) -> None:
        if self.pos != len(self.tokens):
            raise self.error(f"unexpected {self.tokens[self.pos].text!r}")

    # statement forms

    def statement(self) -> Stmt:
        tok = self.next()
        if tok.kind != "ident":
            self.pos -= 1
            raise self.error(f"unknown statement starting with {tok.text!r}")
        word = tok.text
        if word == "halt":
            stmt: Stmt = Halt()
        elif word == "goto":
            stmt = Goto(self.expr())
        elif word == "if":
            cond = self.expr()
            self.expect("then")
            self.expect("goto")
            t = self.expect_int()
            self.expect("else")
            self.expect("goto")
            f = self.expect_int()
            stmt = CondGoto(cond, t, f)
        elif word in ("output", "assert"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            stmt = Output(e) if word == "output" else Assert(e)
        elif word == "store":
            self.expect("(")
            addr = self.expr()
            self.expect(",")
            value = self.expr()
            self.expect(")")
            stmt = Store(addr, value)
        elif word in KEYWORDS:
            self.pos -= 1
            raise self.error(f"unknown statement form {word!r}")
        else:
            self.expect(":=")
            stmt = Assign(word, self.expr())
        self.done()
        return stmt

    # expressions, precedence climbing

    def expr(self, min_prec: int = 1) -> Expr:
        left = self.unary()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "op" or tok.text not in _PRECEDENCE:
                return left
            prec = _PRECEDENCE[tok.text]
            if prec < min_prec:
                return left
            self.pos += 1
            right = self.expr(prec + 1)
            left = BinOp(tok.text, left, right)

    def unary(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text in UNARY_OPS:
            self.pos += 1
            operand = self.unary()
            if tok.text == "-" and isinstance(operand, Const):
                return Const(_wrap64(-operand.value))
            return UnOp(tok.text, operand)
        return self.primary()

    def primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise self.error("expected an expression")
        if tok.kind == "int":
            self.pos += 1
            return Const(_wrap64(tok.value))
        if tok.text == "(":
            self.pos += 1
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "ident":
            self.pos += 1
            if tok.text == "load":
                self.expect("(")
                e = self.expr()
                self.expect(")")
                return Load(e)
            if tok.text == "get_input":
                self.expect("(")
                src = self.peek()
                if src is None or src.kind != "string":
                    raise self.error("get_input expects a quoted source name")
                self.pos += 1
                self.expect(")")
                return GetInput(src.text[1:-1])
            if tok.text in KEYWORDS:
                self.pos -= 1
                raise self.error(f"keyword {tok.text!r} in expression")
            return Var(tok.text)
        raise self.error(f"unexpected {tok.text!r}")


def parse_program(text: str) -> Program:
    statements: List[Stmt] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokenize(raw, lineno)
        if not tokens:
            continue
        statements.append(_LineParser(tokens, lineno, len(raw)).statement())
    return Program(tuple(statements))
