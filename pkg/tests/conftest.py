import numpy as np
import pytest

from vortexmc.gibbs import rademacher_prior, uniform_prior
from vortexmc.spectral import build_spectral_table


@pytest.fixture(scope="session")
def table_m1_eps02():
    return build_spectral_table(1.0, 0.2, 1e-10)


@pytest.fixture(scope="session")
def table_m1_eps01():
    return build_spectral_table(1.0, 0.1, 1e-10)


@pytest.fixture(scope="session")
def rademacher():
    return rademacher_prior()


@pytest.fixture(scope="session")
def uniform_sym():
    return uniform_prior(-1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
