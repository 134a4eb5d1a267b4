import os

import numpy as np
import pytest

from smoothlime.datasets import generate_simulated, split_and_normalize
from smoothlime.model import TrainConfig, train

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(scope="session")
def sim_data():
    return split_and_normalize(generate_simulated(1000, 0), 0.8, 0, normalize=False)


@pytest.fixture(scope="session")
def trained(sim_data):
    net, metrics = train(sim_data, TrainConfig(epochs=15, seed=0))
    return net, metrics


@pytest.fixture(scope="session")
def sim_model(trained):
    return trained[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
