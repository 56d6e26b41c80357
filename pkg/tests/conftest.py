import pytest

REPORT = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the terminal summary."""
    def _report(name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        REPORT.append(line)
        print(line)
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
