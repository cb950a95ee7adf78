import pytest

from sinckrein.krein_system import sample_B

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def table_half():
    """Coefficient ladder for mu = 0.5 up to x = 40."""
    return sample_B(0.5, 40.0)


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
