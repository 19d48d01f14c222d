"""Session-wide caches for the expensive preset runs."""

import pytest

from rotorkick.experiments import preset, run


@pytest.fixture(scope="session")
def fig5_table():
    return run(preset("fig5"))


@pytest.fixture(scope="session")
def fig6_table():
    return run(preset("fig6"))


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    """Log one acceptance criterion; the lines are printed after the run."""
    ACCEPTANCE_LINES.append((number, f"[{'PASS' if passed else 'FAIL'}] criterion {number}: "
                                     f"{title} -- {detail}"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
