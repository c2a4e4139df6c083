import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance():
    """Record one acceptance line: ``acceptance(name, passed, detail)``."""
    def record(name: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append((name, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
