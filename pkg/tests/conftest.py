"""Shared test fixtures and the acceptance summary hook.

The acceptance tests record one line per criterion; the terminal summary
hook replays them at the end of the run so the pass/fail status of each
criterion is visible even when pytest captures stdout.
"""

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
