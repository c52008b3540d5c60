import numpy as np
import pytest

from ccctuner import (GpConfig, HumanParams, MaternKernel, PlantParams,
                      PolicyParams, sample_gp, simulate_ovm_chain)


@pytest.fixture(scope="session")
def kernel():
    return MaternKernel(amplitude=1.0, length_scale=5.0, smoothness=2.5)


@pytest.fixture(scope="session")
def policy():
    return PolicyParams()


@pytest.fixture(scope="session")
def plant():
    return PlantParams()


@pytest.fixture(scope="session")
def human():
    return HumanParams()


@pytest.fixture(scope="session")
def gp_draws(kernel):
    """101 independent 500 s lead-vehicle records (single series each)."""
    return [sample_gp(GpConfig(kernel=kernel, duration=500.0, dt=0.1, seed=s))
            for s in range(101)]


@pytest.fixture(scope="session")
def chain_datasets(kernel, human):
    """Twelve full 8-vehicle synthetic datasets for integration tests."""
    out = []
    for s in range(12):
        lead = sample_gp(GpConfig(kernel=kernel, duration=500.0, dt=0.1, seed=s),
                         vehicle=8)
        chain, valid = simulate_ovm_chain(lead, human, v_star=25.0)
        assert valid
        out.append(chain)
    return out


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(987654321)
