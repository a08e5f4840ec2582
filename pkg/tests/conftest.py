"""Collects the acceptance criteria's PASS/FAIL lines and prints them as one block."""

import pytest

N_CRITERIA = 13
_LINES = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_LINES] = {}


@pytest.fixture
def acceptance_report(request, capsys):
    """``acceptance_report(number, title, ok, detail, elapsed)`` records and echoes one line."""

    def record(number: int, title: str, ok: bool, detail: str, elapsed: float) -> None:
        line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail} [{elapsed:.2f} s]"
        request.config.stash[_LINES][number] = line
        with capsys.disabled():
            print("\n" + line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_LINES]
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        terminalreporter.write_line(lines.get(n, f"ACCEPTANCE {n:2d} FAIL  did not run to completion"))
