from pathlib import Path

import pytest

from gpjet import physics_jet
from gpjet.virtual_machine import VirtualMachine

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def groups():
    return physics_jet.default_pcl_groups()


@pytest.fixture(scope="session")
def jet(groups):
    return physics_jet.solve_jet_profile(groups, n_points=93)


@pytest.fixture(scope="session")
def vm():
    return VirtualMachine()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    report = getattr(mod, "REPORT", None)
    if report:
        terminalreporter.section("acceptance criteria")
        for k in sorted(report):
            terminalreporter.write_line(report[k])
