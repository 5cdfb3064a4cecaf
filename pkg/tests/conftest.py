from __future__ import annotations

from fractions import Fraction

import pytest

from dualtune.landscape import make_landscape, single_piece
from dualtune.poly import Polynomial

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def criterion(request):
    """Record the verdict of one acceptance criterion; errors before recording count as FAIL.

    The criterion number is read from the test name, e.g. ``test_c03_oracle``.
    """
    k = int(request.function.__name__.split("_")[1][1:])

    def record(ok, detail=""):
        ACCEPTANCE[k] = (bool(ok), detail)
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    yield record
    if k not in ACCEPTANCE:
        ACCEPTANCE[k] = (False, "raised before a verdict")


def _aw():
    return Polynomial.variable(2, 0), Polynomial.variable(2, 1)


@pytest.fixture
def perfect_fit():
    a, w = _aw()
    return single_piece(-((w - a) ** 2), alpha=(0, 1), w=((-1, 2),))


@pytest.fixture
def cubic():
    a, w = _aw()
    return single_piece(a * w - Fraction(1, 3) * w**3, alpha=(0, 1), w=((-1, 1),))


@pytest.fixture
def two_lines():
    a, w = _aw()
    return make_landscape((0, 1), ((-1, 1),), "polynomial", [w], [(["ge"], a - w), (["le"], 1 - a + w)])


@pytest.fixture
def circle():
    """Disk of radius 1/4 around (1/2, 0): value 1 inside, 0 outside."""
    a, w = _aw()
    h = (a - Fraction(1, 2)) ** 2 + w**2 - Fraction(1, 16)
    return make_landscape((0, 1), ((-1, 1),), "constant", [h], [(["le"], Fraction(1)), (["ge"], Fraction(0))])
