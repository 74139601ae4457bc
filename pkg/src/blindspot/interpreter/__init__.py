"""Parser and evaluators for the toy imperative language."""
from .machine import (
    CF_POLICIES,
    DEFAULT_STEP_LIMIT,
    ConfigError,
    Executable,
    RunConfig,
    compile_program,
    execute,
    run,
)
from .syntax import ParseError, Program, parse_program

__all__ = [
    "CF_POLICIES",
    "DEFAULT_STEP_LIMIT",
    "ConfigError",
    "Executable",
    "ParseError",
    "Program",
    "RunConfig",
    "compile_program",
    "execute",
    "parse_program",
    "run",
]
