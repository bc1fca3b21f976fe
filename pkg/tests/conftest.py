import pytest

ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def record():
    """Store a one-line acceptance verdict printed at the end of the run."""
    def _record(criterion: str, line: str) -> None:
        ACCEPTANCE[criterion] = line
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
