"""Shared pytest plumbing.

The acceptance tests record one status line per criterion; the terminal
summary hook reprints them after the run so the pass/fail verdicts are
visible even when pytest captures stdout.
"""

import pytest

_acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Append-only list of acceptance verdict lines."""
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
