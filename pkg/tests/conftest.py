import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from portten.backends import device_available, get_backend

settings.register_profile(
    "portten", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("portten")

HAS_DEVICE = device_available()


def pytest_collection_modifyitems(config, items):
    if HAS_DEVICE:
        return
    skip = pytest.mark.skip(reason="no OpenCL device available")
    for item in items:
        if "device" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def reference():
    return get_backend("reference")


@pytest.fixture
def device():
    if not HAS_DEVICE:
        pytest.skip("no OpenCL device available")
    return get_backend("device")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
