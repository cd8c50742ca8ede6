import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_LINES = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion (echoed at session end)."""
    def record(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _LINES[number] = line
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
