import os

import pytest
from hypothesis import HealthCheck, settings

from flexwave.dispersion import WaveContext

settings.register_profile(
    "flexwave",
    deadline=None,
    max_examples=int(os.environ.get("FLEXWAVE_HYPOTHESIS_EXAMPLES", "40")),
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("flexwave")


@pytest.fixture(scope="session")
def ctx1():
    return WaveContext.from_k0(1.0)
