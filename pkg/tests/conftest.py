import pytest

# lines recorded by acceptance tests, echoed at the end of the run
ACCEPTANCE_LOG: list[str] = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LOG


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance details")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
