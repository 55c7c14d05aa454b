from __future__ import annotations

import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def acceptance(request):
    """Recorder for one-line acceptance verdicts shown in the terminal summary."""
    lines = request.config.stash[_LINES_KEY]

    def record(criterion: int, passed: bool | None, detail: str) -> None:
        verdict = "REPORTED" if passed is None else ("PASS" if passed else "FAIL")
        lines.append((criterion, f"criterion {criterion}: {verdict}  {detail}"))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(line)
