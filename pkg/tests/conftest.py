import pytest

_REPORT = []


@pytest.fixture(scope="session")
def report():
    """Collects one summary line per acceptance criterion."""
    def add(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _REPORT.append(line)
        print(line)
        return passed
    return add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
