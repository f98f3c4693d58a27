import pytest

from pairsim.config import load_run_config


@pytest.fixture(scope="session")
def run_config():
    return load_run_config()


@pytest.fixture(scope="session")
def crystal(run_config):
    return run_config.crystal


@pytest.fixture(scope="session")
def sellmeier(run_config):
    return run_config.sellmeier


@pytest.fixture(scope="session")
def apd(run_config):
    return run_config.apd
