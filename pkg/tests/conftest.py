import warnings

import pytest

from schrodinger_lab.errors import OverlapWarning

# (criterion id, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES = []


@pytest.fixture
def quiet_overlap():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OverlapWarning)
        yield


@pytest.fixture
def acceptance():
    def record(cid, ok, detail):
        line = f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
