from fractions import Fraction

import pytest

from nilhodge.algebra import AcsFrame, NilLieAlgebra

HALF = Fraction(1, 2)


@pytest.fixture(scope="session")
def kt():
    return NilLieAlgebra.kodaira_thurston()


@pytest.fixture(scope="session")
def torus():
    return NilLieAlgebra.abelian()


@pytest.fixture(scope="session")
def ja(kt):
    return AcsFrame.j_a(kt, HALF)


@pytest.fixture(scope="session")
def j42(kt):
    return AcsFrame.example42(kt)


def pytest_terminal_summary(terminalreporter):
    from .helpers import acceptance_lines

    lines = acceptance_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
