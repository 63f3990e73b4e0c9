import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aniso_torsion import (
    EuclideanNorm,
    QuadraticNorm,
    make_square,
    solve_torsion,
    triangulate,
    wulff_shape,
)

EUCLID = EuclideanNorm()
QUAD = QuadraticNorm(np.diag([1.0, 4.0]))


@pytest.fixture(scope="session")
def euclid():
    return EUCLID


@pytest.fixture(scope="session")
def quad():
    return QUAD


@pytest.fixture(scope="session")
def disk():
    return wulff_shape(EUCLID, 1.0, n_vertices=720)


@pytest.fixture(scope="session")
def disk_solution(disk):
    return solve_torsion(triangulate(disk, 0.03), EUCLID, 2.0)


@pytest.fixture(scope="session")
def unit_square():
    return make_square(0.5)


@pytest.fixture(scope="session")
def square_solution(unit_square):
    return solve_torsion(triangulate(unit_square, 0.02), EUCLID, 2.0)


ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one verdict line per acceptance criterion."""

    def record(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
