import pytest
from hypothesis import settings

from bergman_lab.quadrature import build_rule

settings.register_profile("lab", max_examples=60, deadline=None)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def rule():
    """The working rule: 64 radial nodes, 128 angular nodes."""
    return build_rule(64, 128)


@pytest.fixture(scope="session")
def panels():
    return build_rule(64, 128, theta_rule="panels")
