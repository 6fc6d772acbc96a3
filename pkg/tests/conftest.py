import pytest

from hypergameopt import fan


@pytest.fixture(scope="session")
def params():
    return fan.FanParams()


@pytest.fixture(scope="session")
def baseline(params):
    return fan.fan_baseline(params)
