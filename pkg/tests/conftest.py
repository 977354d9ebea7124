import sys
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from lrdyson.models import dark_ring, dimer, random_system  # noqa: E402

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []
WALL_LIMIT = 60.0
_START = {}


@pytest.fixture(scope="session")
def dimer_system():
    return dimer()


@pytest.fixture(scope="session")
def ring():
    return dark_ring()


@pytest.fixture(scope="session")
def random_systems():
    return [random_system(s) for s in range(10)]


def pytest_sessionstart(session):
    _START["t"] = time.perf_counter()


@pytest.hookimpl(tryfirst=True)
def pytest_sessionfinish(session, exitstatus):
    if not ACCEPTANCE_LINES:
        return
    elapsed = time.perf_counter() - _START["t"]
    ok = elapsed < WALL_LIMIT
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  [12] full suite wall time: {elapsed:.1f} s vs {WALL_LIMIT:.0f} s")
    if not ok:
        session.exitstatus = pytest.ExitCode.TESTS_FAILED


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda x: x.split('[', 1)[1]):
            terminalreporter.write_line(line)
