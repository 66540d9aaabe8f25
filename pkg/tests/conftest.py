"""Shared test plumbing: the acceptance-criteria reporter.

Acceptance tests record one line per criterion; the lines are echoed in
the terminal summary so the pass/fail table is visible even when pytest
captures stdout.
"""

import pytest


class AcceptanceReporter:
    def __init__(self):
        self.lines = []

    def record(self, label: str, ok: bool, detail: str) -> None:
        line = f"criterion {label:>3}  {'PASS' if ok else 'FAIL'}  {detail}"
        self.lines.append(line)
        print(line)
        assert ok, line


_REPORTER = AcceptanceReporter()


@pytest.fixture(scope="session")
def acceptance():
    return _REPORTER


def pytest_terminal_summary(terminalreporter):
    if _REPORTER.lines:
        terminalreporter.section("acceptance criteria")
        for line in _REPORTER.lines:
            terminalreporter.write_line(line)
