"""Shared fixtures: acceptance-criteria reporting and hypothesis settings."""

import pytest
from hypothesis import settings

settings.register_profile("suite", max_examples=60, deadline=None)
settings.load_profile("suite")

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Returns a recorder; each acceptance test logs one PASS/FAIL line.

    The collected lines are printed in a dedicated section of the terminal
    summary so the verdict for every criterion is visible in one place.
    """
    def record(criterion: int, passed: bool, detail: str):
        verdict = "PASS" if passed else "FAIL"
        _ACCEPTANCE_LINES.append((criterion, f"criterion {criterion:2d}: {verdict}  {detail}"))
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
