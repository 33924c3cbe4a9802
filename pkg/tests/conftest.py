import functools

import numpy as np
import pytest

import towersite
from towersite import _backend, cli, siting

ACCEPTANCE_LINES = []


@pytest.fixture(params=_backend.available())
def backend(request):
    """Run the test once per available kernel backend."""
    prev = _backend.use(request.param)
    yield request.param
    _backend.use(prev)


@pytest.fixture
def core_backend():
    if "core" not in _backend.available():
        pytest.skip("compiled extension not built")
    prev = _backend.use("core")
    yield
    _backend.use(prev)


SITE_RUNS = []


def _checked_site(real):
    """Wrap the siting entry point so every run in the suite has its gains checked."""

    @functools.wraps(real)
    def checked(*args, **kwargs):
        result = real(*args, **kwargs)
        gains = result.gains
        SITE_RUNS.append(gains)
        assert all(a >= b for a, b in zip(gains, gains[1:])), "marginal gains increased"
        return result

    return checked


# installed before test modules import ``site``, so their references see the wrapper
_site = _checked_site(siting.site)
for _mod in (siting, towersite, cli):
    _mod.site = _site


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
        terminalreporter.write_line(
            f"(non-increasing gain check applied to all {len(SITE_RUNS)} siting runs of this session)")
