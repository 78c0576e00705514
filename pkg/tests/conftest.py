"""Shared test plumbing: collects acceptance-criterion verdict lines and echoes
them in the terminal summary so they are visible even for passing tests."""

import pytest

CRITERION_LINES = []


def record_criterion(line: str) -> None:
    CRITERION_LINES.append(line)


@pytest.hookimpl
def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
