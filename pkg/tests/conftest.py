"""Shared test plumbing: the acceptance-criteria result board.

Acceptance tests call record_criterion() before asserting so the terminal
summary always carries one PASS/FAIL line per criterion, even when pytest
output is long.
"""

_BOARD = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    _BOARD[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _BOARD:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_BOARD):
        title, passed, detail = _BOARD[n]
        word = "PASS" if passed else "FAIL"
        tr.write_line(f"ACCEPTANCE {n} {word} [{title}] {detail}")
