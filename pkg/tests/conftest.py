import pytest

ACCEPTANCE = {}
N_CRITERIA = 10


@pytest.fixture
def acceptance():
    """``record(n, ok, detail)``: store and print one acceptance verdict."""
    def record(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        ACCEPTANCE[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        terminalreporter.write_line(ACCEPTANCE.get(n, f"FAIL criterion {n}: no result (test errored or was skipped)"))
