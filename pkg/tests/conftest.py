import logging

import pytest

ACCEPTANCE = {}


def record(number, passed, detail):
    """Store one acceptance outcome for the summary printed at the end of the run."""
    ACCEPTANCE[number] = (bool(passed), detail)


@pytest.fixture(autouse=True)
def _quiet_solver_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="ktvgl")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
