import numpy as np
import pytest

from neuralgi import scenes


@pytest.fixture(scope="session")
def furnace():
    return scenes.build(scenes.furnace_doc())


@pytest.fixture(scope="session")
def cornell():
    return scenes.build(scenes.cornell_doc())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
