import pytest
from hypothesis import settings

from coneflow.cones import ConeProfile
from coneflow.expander import solve_expander_profile

settings.register_profile("suite", deadline=None, max_examples=25)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def cone21():
    return ConeProfile.radial(2, 1.0)


@pytest.fixture(scope="session")
def profile21(cone21):
    return solve_expander_profile(cone21)


@pytest.fixture(scope="session")
def profile31():
    return solve_expander_profile(ConeProfile.radial(3, 1.0))
