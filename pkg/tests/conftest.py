import random
from fractions import Fraction

import pytest
import sympy as sp

from endomra.endo import TorusSystem, golden_mean_shift
from endomra.measure import invariant_measure
from endomra.observables import TrigPoly
from endomra.ruelle import Filter, golden_mean_filter, haar_filter


@pytest.fixture(scope="session")
def gm():
    return golden_mean_shift()


@pytest.fixture(scope="session")
def gm_rho(gm):
    return invariant_measure(gm)


@pytest.fixture(scope="session")
def gm_filter(gm):
    return golden_mean_filter(gm)


@pytest.fixture(scope="session")
def gm_cycle(gm):
    return gm.enumerate_cycles(1)[0]


@pytest.fixture(scope="session")
def t2():
    return TorusSystem(2)


@pytest.fixture(scope="session")
def haar(t2):
    return invariant_measure(t2)


@pytest.fixture(scope="session")
def haar_f():
    return haar_filter(2)


@pytest.fixture(scope="session")
def zero_cycle(t2):
    return next(c for c in t2.enumerate_cycles(1) if c.points == (Fraction(0),))


@pytest.fixture(scope="session")
def third_cycle(t2):
    return next(c for c in t2.enumerate_cycles(2) if c.period == 2)


@pytest.fixture(scope="session")
def cubic_filter():
    """``(1 + z^3)/sqrt(2)``: W-cycles ``{0}`` and ``{1/3, 2/3}``."""
    c = 1 / sp.sqrt(2)
    return Filter(TrigPoly({0: c, 3: c}))


@pytest.fixture
def rng():
    return random.Random(12345)


# -- acceptance summary: one PASS/FAIL line per criterion ---------------------------------------

_ACCEPTANCE: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when == "teardown":
        return
    key = (mark.args[0], mark.args[1])
    if rep.failed:
        _ACCEPTANCE[key] = "FAIL"
    elif rep.when == "call":
        _ACCEPTANCE.setdefault(key, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), status in sorted(_ACCEPTANCE.items()):
        terminalreporter.write_line(f"{status}  criterion {num:>2}: {title}")
