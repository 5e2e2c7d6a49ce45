import numpy as np
import pytest

from comp_isac import ScenarioConfig, sample_channels


@pytest.fixture(scope="session")
def scenario():
    """The default scenario; treat as read-only inside tests."""
    return ScenarioConfig()


@pytest.fixture(scope="session")
def realization(scenario):
    """Canonical channel snapshot for the default scenario."""
    return sample_channels(scenario)


@pytest.fixture(scope="session")
def exp_draws():
    """A large fixed exponential sample shared by distribution tests."""
    return np.random.default_rng(9001).exponential(1.0, size=100_000)
