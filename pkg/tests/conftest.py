import pytest

from nbtrade.config import Config
from nbtrade.model import SystemModel

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def default_config():
    return Config.defaults()


@pytest.fixture(scope="session")
def default_model(default_config):
    return SystemModel.from_config(default_config)


@pytest.fixture
def report_criterion():
    """Record one acceptance line; all lines are echoed in the terminal summary."""
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append((number, line))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
