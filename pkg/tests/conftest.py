import pytest

from isomass.metrics import MetricModel
from isomass.quadrature import QuadratureConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical checks")


@pytest.fixture
def flat():
    return MetricModel.euclidean()


@pytest.fixture
def schw_pos():
    return MetricModel.schwarzschild(2.0)


@pytest.fixture
def schw_neg():
    return MetricModel.schwarzschild(-2.0)


@pytest.fixture
def cfg():
    return QuadratureConfig()
