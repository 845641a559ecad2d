import pytest

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[0][1:]), s.split()[1] == "INFO")):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    def record(number, ok, summary):
        # ok=None records an informational line without a verdict
        status = "INFO" if ok is None else "PASS" if ok else "FAIL"
        line = f"C{number} {status} {summary}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok is None or ok, line

    return record
