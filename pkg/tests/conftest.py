import pytest

_LINES = []


@pytest.fixture(scope="session")
def criterion():
    """Record one pass/fail line per acceptance criterion.

    Lines print immediately (visible with -s or on failure) and again in
    the terminal summary, so a plain `pytest -v` run shows every verdict.
    """

    def record(num: int, description: str, ok: bool) -> bool:
        line = f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'}: {description}"
        _LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
