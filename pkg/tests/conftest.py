import sys

import pytest

from blindspot.interpreter import parse_program

ALG1_TEXT = """\
a := get_input("in")
b := get_input("in")
c := a + b
if c >= 42 then goto 4 else goto 6
d := 5
output(d)
halt
"""

SKIP_TEXT = """\
a := get_input("in")
b := get_input("in")
output(a)
halt
"""

COPY_TEXT = """\
x := get_input("in")
output(x)
halt
"""


@pytest.fixture
def alg1():
    return parse_program(ALG1_TEXT)


@pytest.fixture
def skip_parser():
    return parse_program(SKIP_TEXT)


@pytest.fixture
def copy_through():
    return parse_program(COPY_TEXT)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
