import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from twistnls.spectral_core import Grid

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def grid():
    return Grid(256, 16 * np.pi)


@pytest.fixture
def soliton_grid():
    return Grid(512, 40 * np.pi)


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """``criterion(label, ok, detail)`` records a pass/fail line and asserts ``ok``."""

    def record(label, ok, detail):
        line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
