import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SESSION_START = time.perf_counter()
CRITERIA = {}  # criterion number -> one-line verdict, filled by test_acceptance.py


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_collection_modifyitems(config, items):
    # acceptance criteria run last so the suite-runtime criterion sees the whole run
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[key])
    terminalreporter.write_line(f"suite wall time {time.perf_counter() - SESSION_START:.1f} s")
