import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    max_examples=int(os.environ.get("HYPOTHESIS_MAX_EXAMPLES", "60")),
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("repo")

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line; it is printed at the end of the run."""

    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def nav_state(variant, geo=None, C_nb=None, v_n=(4.0, -2.0, 0.3), bias=None):
    """A navigation state in any variant, built from NED attitude and ground velocity."""
    from se23preint.earth_models import (
        GeodeticPosition,
        dcm_ecef_to_ned,
        earth_rate_e,
        earth_rate_n,
        geodetic_to_ecef,
        ned_position_vector,
    )
    from se23preint.increments import ImuBias
    from se23preint.propagation import NavState
    from se23preint.se23_core import ExtendedPose, exp_so3

    geo = GeodeticPosition(0.7, 0.3, 120.0) if geo is None else geo
    C_nb = exp_so3([0.1, -0.2, 0.4]) if C_nb is None else C_nb
    v_n = np.asarray(v_n, float)
    bias = bias if bias is not None else ImuBias()
    if variant.is_ned:
        r = ned_position_vector(geo)
        v = v_n + (np.cross(earth_rate_n(geo), r) if variant.is_transformed else 0.0)
        return NavState(ExtendedPose(C_nb, v, r), variant, 0.0, bias, geo)
    C_en = dcm_ecef_to_ned(geo.lat, geo.lon).T
    r = geodetic_to_ecef(geo)
    v = C_en @ v_n + (np.cross(earth_rate_e(), r) if variant.is_transformed else 0.0)
    return NavState(ExtendedPose(C_en @ C_nb, v, r), variant, 0.0, bias)


@pytest.fixture
def make_state():
    return nav_state
