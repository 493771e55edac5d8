import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "gnpn", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile(
    "stress", max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("GNPN_HYPOTHESIS_PROFILE", "gnpn"))

ALPHA = 1 / 22


@pytest.fixture
def circle():
    from gnpn.graphgen import circle_precision

    return circle_precision(8, ALPHA)


def random_spd(rng, d, cond=100.0):
    """Random SPD matrix with condition number ``cond``."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = np.geomspace(1.0, cond, d)
    m = (q * eig) @ q.T
    return 0.5 * (m + m.T)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[key])
