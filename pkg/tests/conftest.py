import pytest

from critles.spectral import TorusGrid


@pytest.fixture(scope="session")
def grid4():
    return TorusGrid(4)


@pytest.fixture(scope="session")
def grid8():
    return TorusGrid(8)


@pytest.fixture(scope="session")
def grid16():
    return TorusGrid(16)


# acceptance criterion -> report line, filled in by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
