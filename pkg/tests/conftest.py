import numpy as np
import pytest
from hypothesis import settings

from heatwalk.distributions import make_step_distribution
from heatwalk.heatref import HeatReference
from heatwalk.testfn import gauss_bump

settings.register_profile("ci", max_examples=25, deadline=None)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def bump():
    return gauss_bump(1.0)


@pytest.fixture(scope="session")
def rad():
    return make_step_distribution("rademacher")


@pytest.fixture(scope="session")
def asym():
    return make_step_distribution("asym_lattice")


@pytest.fixture(scope="session")
def rad_ref(bump, rad):
    return HeatReference(bump, rad.cov)


@pytest.fixture(scope="session")
def asym_ref(bump, asym):
    return HeatReference(bump, asym.cov)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
