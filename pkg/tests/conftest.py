import numpy as np
import pytest

from egvfl import make_problem, partition_vertical, solve_ridge_oracle, synth_regression


def synthetic_problem(seed=1, s=200, d=50, n=5, cond=1e3, **kw):
    A, b = synth_regression(s, d, cond=cond, seed=seed)
    return make_problem(partition_vertical(A, b, n), **kw)


@pytest.fixture(scope="session")
def reference():
    """The acceptance instance: s=200, d=50, n=5, cond=1e3, lambda=lmax/1e3."""
    pb = synthetic_problem()
    return pb, solve_ridge_oracle(pb)


@pytest.fixture
def small():
    A, b = synth_regression(30, 9, cond=10.0, seed=4, scale=30.0)
    pb = make_problem(partition_vertical(A, b, 3))
    return pb, solve_ridge_oracle(pb)


def flat(blocks):
    return np.concatenate(blocks)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
