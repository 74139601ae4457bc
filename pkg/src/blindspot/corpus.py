"""Bundled sample programs and seeded input generators for them.

Each generator produces inputs of at most 64 bytes that mostly follow the
program's expected layout, with random trailing bytes the program never
reads.
"""
from __future__ import annotations

import random
from importlib import resources
from typing import Callable, Dict, List

from .interpreter import Program, parse_program

MAX_INPUT = 64
SOURCE = "in"


def program_text(name: str) -> str:
    return resources.files(__package__).joinpath("programs", f"{name}.spl").read_text("utf-8")


def load_program(name: str) -> Program:
    return parse_program(program_text(name))


def _noise(rng: random.Random, n: int) -> bytes:
    return bytes(rng.randrange(256) for _ in range(n))


def _trailer(rng: random.Random, used: int) -> bytes:
    return _noise(rng, rng.randint(0, MAX_INPUT - used))


def _alg1(rng: random.Random) -> bytes:
    head = bytes([rng.randrange(41), rng.randrange(41)])
    return head + _trailer(rng, 2)


def _copy_through(rng: random.Random) -> bytes:
    return _noise(rng, rng.randint(8, MAX_INPUT))


def _skip_parser(rng: random.Random) -> bytes:
    return _noise(rng, rng.randint(2, MAX_INPUT))


def _checksum_guard(rng: random.Random) -> bytes:
    payload = _noise(rng, 8)
    check = sum(payload) & 0xFF if rng.random() < 0.5 else rng.randrange(256)
    return payload + bytes([check]) + _trailer(rng, 9)


_PRINTABLE = bytes(range(0x20, 0x7F))
_LETTERS = b"abcdefghijklmnopqrstuvwxyz"


def _comment_kv(rng: random.Random) -> bytes:
    lines = [b"#" + bytes(rng.choice(_PRINTABLE) for _ in range(rng.randint(1, 6)))]
    while sum(len(line) + 1 for line in lines) < 40:
        roll = rng.random()
        if roll < 0.35:
            body = bytes(rng.choice(_PRINTABLE) for _ in range(rng.randint(0, 6)))
            lines.append(b"#" + body)
        elif roll < 0.45:
            lines.append(b"")
        else:
            key = bytes(rng.choice(_LETTERS) for _ in range(rng.randint(1, 4)))
            value = bytes(rng.choice(_PRINTABLE) for _ in range(rng.randint(0, 5)))
            lines.append(key + b"=" + value)
    body = b"\n".join(lines)
    if rng.random() < 0.5:
        body += b"\n"
    body = body[:MAX_INPUT - 1]
    return bytes([len(body)]) + body + _trailer(rng, 1 + len(body))


def _records(rng: random.Random) -> bytes:
    count = rng.randint(1, 3)
    out = bytearray([count | (rng.randrange(64) << 2)])
    for _ in range(count):
        length = rng.randrange(8)
        out.append(length | (rng.randrange(32) << 3))
        out += _noise(rng, length)
        out += _noise(rng, (3 - length) & 3)
    return bytes(out) + _trailer(rng, len(out))


def _table_lookup(rng: random.Random) -> bytes:
    return _noise(rng, rng.randint(2, MAX_INPUT))


GENERATORS: Dict[str, Callable[[random.Random], bytes]] = {
    "copy_through": _copy_through,
    "skip_parser": _skip_parser,
    "checksum_guard": _checksum_guard,
    "comment_kv": _comment_kv,
    "records": _records,
    "alg1": _alg1,
    "table_lookup": _table_lookup,
}

PROGRAMS = tuple(GENERATORS)


def generate_inputs(name: str, count: int, seed: int = 0) -> List[bytes]:
    """``count`` inputs for program ``name``, reproducible from ``seed``."""
    rng = random.Random(f"{name}:{seed}")
    return [GENERATORS[name](rng) for _ in range(count)]
