import numpy as np
import pytest

from lapcast import backend


def pytest_addoption(parser):
    parser.addoption("--backend", default=None,
                     help="force a kernel backend (numba|numpy) for the whole run")


@pytest.fixture(scope="session", autouse=True)
def _session_backend(request):
    forced = request.config.getoption("--backend")
    if forced:
        backend.set_backend(forced)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
