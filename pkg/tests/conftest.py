"""Shared pytest hooks: surface acceptance PASS lines in the summary."""

import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_record():
    """Callable recording a line to print in the terminal summary."""
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
