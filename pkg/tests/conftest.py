import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from narlab import make_group

settings.register_profile(
    "narlab", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("narlab")

GROUPS = ["heisenberg:1", "heisenberg:2", "quaternionic:2", "abelian:1", "abelian:3"]


@pytest.fixture(scope="session")
def h1():
    return make_group("heisenberg:1")


@pytest.fixture(scope="session")
def ab1():
    return make_group("abelian:1")


@pytest.fixture(params=GROUPS, scope="session")
def group(request):
    return make_group(request.param)


def random_point(g, rng, scale=1.0):
    return g.point(X=rng.normal(size=g.dim_v) * scale, Z=rng.normal(size=g.k) * scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
