"""Shared fixtures and the acceptance summary printer.

test_acceptance registers one verdict per criterion; the terminal-summary
hook prints them as single pass/fail lines at the end of the run so they
are visible regardless of output capturing.
"""

import pytest

ACCEPTANCE_RESULTS = {}


def record_acceptance(number: int, label: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS[number] = (label, bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        label, passed, detail = ACCEPTANCE_RESULTS[number]
        verdict = "PASS" if passed else "FAIL"
        line = f"criterion {number} [{verdict}] {label}"
        if detail:
            line += f" ({detail})"
        tr.write_line(line, green=passed, red=not passed)


@pytest.fixture
def rng_seed():
    return 20240817
