import numpy as np
import pytest
from hypothesis import settings

from sigmatile.arith import GOLDEN, SQRT2_MINUS_1
from sigmatile.core import Modulator, QuantizerRule
from sigmatile.simulate import run

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record(request):
    """record(ok, detail) for the test's ``criterion`` marker; FAIL until called."""
    n = request.node.get_closest_marker("criterion").args[0]
    ACCEPTANCE[n] = (False, "did not complete")

    def _record(ok, detail):
        ACCEPTANCE[n] = (bool(ok), detail)

    return _record


@pytest.fixture(scope="session")
def ideal2():
    return Modulator(2, QuantizerRule.ideal(), SQRT2_MINUS_1)


@pytest.fixture(scope="session")
def ideal1():
    return Modulator(1, QuantizerRule.ideal(), SQRT2_MINUS_1)


@pytest.fixture(scope="session")
def traj2(ideal2):
    """Ideal second-order run, 10^6 steps."""
    return run(ideal2, None, 10**6)


@pytest.fixture(scope="session")
def traj1(ideal1):
    return run(ideal1, None, 10**6)


@pytest.fixture(scope="session")
def onebit():
    """A 1-bit clamped second-order rule with an empirically single, v_2-connected tile."""
    return Modulator(2, QuantizerRule.clamped((1.0, 1.0, 0.5), (0.5, 0.0), (0, 1)), GOLDEN)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
