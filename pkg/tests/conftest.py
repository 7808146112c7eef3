import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from geogate import device as dev

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def params():
    return dev.reference_device()


@pytest.fixture(scope="session")
def small_params():
    return dev.DeviceParams.from_mhz(g1=10.0, g2=10.0, g12=0.5)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def omega_c_at(params, detuning_mhz):
    return params.omega1 + dev.mhz(detuning_mhz)


GAMMAS = (np.pi, np.pi / 2, np.pi / 4)
