from pathlib import Path

import pytest

from batterbot.control import speed_dataset, time_dataset, train_control_model
from batterbot.eval import train_ratio_model
from batterbot.sim import SurrogateParams

FIXTURE_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def params():
    return SurrogateParams()


@pytest.fixture(scope="session")
def ratio_model(params):
    return train_ratio_model(params, seed=0)


@pytest.fixture(scope="session")
def speed_model(params):
    return train_control_model(speed_dataset(params, seed=0), "speed")[0]


@pytest.fixture(scope="session")
def time_model(params):
    return train_control_model(time_dataset(params, seed=0), "time")[0]


@pytest.fixture(scope="session")
def fixture_dir():
    return FIXTURE_DIR


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
