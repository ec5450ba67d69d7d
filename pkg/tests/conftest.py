from fractions import Fraction

import pytest

from bottleneck_wft.fundamental import ModelParams
from bottleneck_wft.mesh import build_mesh


@pytest.fixture(scope="session")
def desk():
    return ModelParams(Fraction(1, 5), Fraction(9, 25))


@pytest.fixture(scope="session")
def mesh6(desk):
    return build_mesh(6, desk)


@pytest.fixture(scope="session")
def mesh8(desk):
    return build_mesh(8, desk)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
