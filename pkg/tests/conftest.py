import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the pass/fail line of one acceptance criterion, then assert it."""
    def report(n: int, ok: bool, detail: str):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[n] = line
        print(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
