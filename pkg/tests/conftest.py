import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one ``CRITERION n: PASS|FAIL`` line, printed now and in the summary."""

    def _report(number: int, passed: bool, detail: str) -> None:
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
