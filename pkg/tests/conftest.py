import pytest

from rramcam.camcell import make_variant


@pytest.fixture(scope="session")
def pcb():
    return make_variant("PcbResistor")


@pytest.fixture(scope="session")
def minimum():
    return make_variant("IntegratedMinimum")


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
