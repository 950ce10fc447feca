"""
Shared fixtures: the shipped 14-bus case, its base flow and limits, and a
small five-bus case for fast unit tests.
"""

from pathlib import Path

import numpy as np
import pytest

from grid.case_parser import load_case, parse_case
from grid.line_limits import LineLimits, assign_limits
from powerflow.ac_solver import solve_ac
from powerflow.topology import LineSpace

ROOT = Path(__file__).parent
CASES_DIR = ROOT / "cases"

# Meshed four-bus core plus a radial spur to bus 5 (line 6 islands bus 5)
TINY_CASE = """
function mpc = tiny5
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1   3   0   0   0   0   1   1.06    0   0   1   1.1 0.9;
    2   2   20  10  0   0   1   1.04    0   0   1   1.1 0.9;
    3   1   60  20  0   0   1   1       0   0   1   1.1 0.9;
    4   1   40  15  0   0   1   1       0   0   1   1.1 0.9;
    5   1   10  5   0   0   1   1       0   0   1   1.1 0.9;
];
mpc.gen = [
    1   0   0   300 -300    1.06    100 1;
    2   60  0   100 -100    1.04    100 1;
];
mpc.branch = [
    1   2   0.02    0.06    0.03    0   0   0   0   0   1;
    1   3   0.08    0.24    0.025   0   0   0   0   0   1;
    2   3   0.06    0.18    0.02    0   0   0   0   0   1;
    2   4   0.06    0.18    0.02    0   0   0   0   0   1;
    3   4   0.01    0.03    0.01    0   0   0   0   0   1;
    4   5   0.08    0.24    0.025   0   0   0   0   0   1;
];
"""


def case_path(name: str) -> Path:
    """Path of a case file under cases/; the test is skipped when it is absent."""
    path = CASES_DIR / name
    if not path.exists():
        pytest.skip(f"{name} not available under cases/")
    return path


@pytest.fixture(scope="session")
def tiny_case():
    return parse_case(TINY_CASE)


@pytest.fixture(scope="session")
def tiny_limits(tiny_case):
    return assign_limits(tiny_case, solve_ac(tiny_case))


@pytest.fixture(scope="session")
def case14():
    return load_case(CASES_DIR / "case14.m")


@pytest.fixture(scope="session")
def base14(case14):
    return solve_ac(case14)


@pytest.fixture(scope="session")
def limits14(case14, base14):
    return assign_limits(case14, base14)


@pytest.fixture(scope="session")
def lines14(case14):
    return LineSpace.from_case(case14)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def uniform_limits(n_lines: int, value: float = 1000.0) -> LineLimits:
    """Limits no flow in the small test cases ever reaches."""
    return LineLimits(np.full(n_lines, value))
