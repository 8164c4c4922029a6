import sys
from pathlib import Path

import pytest

from t2m.config import resolve_fixture

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def flat():
    return resolve_fixture("flat-cartesian-polar")


@pytest.fixture(scope="session")
def flat_fault():
    return resolve_fixture("flat-cartesian-polar-fault")


@pytest.fixture(scope="session")
def sphere():
    return resolve_fixture("sphere-stereographic-3chart")


@pytest.fixture(scope="session")
def sphere_fault():
    return resolve_fixture("sphere-stereographic-3chart-fault")


@pytest.fixture(scope="session")
def tower_fx():
    return resolve_fixture("truncation-tower-d4")


@pytest.fixture(scope="session")
def tower_fault():
    return resolve_fixture("truncation-tower-d4-fault")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
