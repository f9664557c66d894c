import warnings

import pytest
from hypothesis import HealthCheck, settings

from smsnroc.distributions import DistSpec
from smsnroc.simulation import load_scenarios

# quadrature-backed skew-t evaluations are slow enough to trip the default deadline
settings.register_profile("smsn", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("smsn")


@pytest.fixture(scope="session")
def scenarios():
    return load_scenarios()


@pytest.fixture
def binormal():
    return (DistSpec.sn(0.0, 1.0, 0.0), DistSpec.sn(2.0, 1.0, 0.0))


@pytest.fixture(autouse=True)
def _quiet_runtime_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield
