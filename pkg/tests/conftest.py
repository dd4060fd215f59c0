import math

import pytest
from hypothesis import HealthCheck, settings

from hetplan.model import NetworkParams, UserParams

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# one BS per 50 m x 50 m, one static user per 20 m x 20 m, one mobile per 20 m of road
LAMBDA_BS = 1 / 2500
LAMBDA_SU = 1 / 400
LAMBDA_MU = 1 / 20
LAMBDA_L = math.sqrt(2) / 50


@pytest.fixture
def users():
    return UserParams(LAMBDA_SU, LAMBDA_MU, LAMBDA_L, v=20.0, t_h=2.0)


@pytest.fixture
def homogeneous():
    return NetworkParams(LAMBDA_BS, 1.0, 1.0, 1.0, 4.0)


ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
