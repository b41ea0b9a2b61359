import os

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from spsfilter.liouville import RateSet

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

rate = st.floats(min_value=0.0, max_value=20.0, allow_nan=False)
positive_rate = st.floats(min_value=1e-2, max_value=20.0, allow_nan=False)
duration = st.floats(min_value=1e-2, max_value=5.0, allow_nan=False)


@st.composite
def rate_sets(draw, pulse=duration):
    return RateSet(gamma_pump=draw(positive_rate), gamma_deph=draw(rate),
                   pulse_T=draw(pulse))


@pytest.fixture
def typical_rates():
    return RateSet(gamma_pump=1.0, gamma_deph=2.0, pulse_T=0.8)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line and fail the test if the check failed."""
    def record(number: int, passed: bool, detail: str):
        ACCEPTANCE_LINES.append((number, passed, detail))
        assert passed, f"criterion {number}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
