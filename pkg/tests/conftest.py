import json
from pathlib import Path

import pytest

from critnls.grid import build_grid
from critnls.limit_profile import solve_q
from critnls.minimizer import continuation_sweep
from critnls.params import Params, PotentialSpec

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name):
    return json.loads((FIXTURES / name).read_text())


@pytest.fixture(scope="session")
def oracle_q():
    return {(d["N"], d["b"]): d for d in load_fixture("oracle_q.json")}


@pytest.fixture(scope="session")
def oracle_sweep():
    return load_fixture("oracle_sweep.json")


@pytest.fixture(scope="session")
def oracle_kernel():
    return {(d["N"], d["b"]): d for d in load_fixture("oracle_kernel.json")}


@pytest.fixture(scope="session")
def q1():
    """Q for N=1, b=0.5 on the default grid."""
    return solve_q(Params(1, 0.5), build_grid(1, 0.5, 25.0, 4096))


@pytest.fixture(scope="session")
def q1_coarse():
    return solve_q(Params(1, 0.5), build_grid(1, 0.5, 25.0, 1024))


@pytest.fixture(scope="session")
def q3():
    return solve_q(Params(3, 1.0), build_grid(3, 1.0, 25.0, 4096))


@pytest.fixture(scope="session")
def q3_coarse():
    return solve_q(Params(3, 1.0), build_grid(3, 1.0, 25.0, 1024))


@pytest.fixture(scope="session")
def harmonic():
    return PotentialSpec(2.0, 1.0)


@pytest.fixture(scope="session")
def sweep1(q1, harmonic):
    fracs = (0.9, 0.95, 0.98, 0.99, 0.995)
    return continuation_sweep(Params(1, 0.5), harmonic, q1.grid, [f * q1.a_star for f in fracs], q=q1)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number].line())
