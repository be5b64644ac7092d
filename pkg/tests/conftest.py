import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

import apdhg  # noqa: E402
import apdhg.cli  # noqa: E402
import apdhg.solver  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# -- stepsize invariants checked on every solve of the suite ------------------

_original_solve = apdhg.solver.solve
SOLVE_LOG = {"solves": 0, "adaptive": 0, "violations": []}


def stepsize_violations(trace):
    """Product drift (non-backtracking adaptive) and the balancing phi bound."""
    out = []
    diag = apdhg.solver.check_convergence_conditions(trace)
    if trace.policy == "adaptive" and diag.product_drift != 0.0:
        out.append(f"product drift {diag.product_drift!r}")
    if not diag.phi_balance <= diag.phi_bound:
        out.append(f"sum phi {diag.phi_balance} > {diag.phi_bound}")
    if trace.policy == "constant" and diag.phi_balance != 0.0:
        out.append("constant run changed its stepsizes")
    return out


def _checked_solve(*args, **kwargs):
    iterate, trace = _original_solve(*args, **kwargs)
    SOLVE_LOG["solves"] += 1
    SOLVE_LOG["adaptive"] += trace.policy == "adaptive"
    bad = stepsize_violations(trace)
    if bad:
        SOLVE_LOG["violations"].append((trace.policy, bad))
        raise AssertionError(f"stepsize invariant violated ({trace.policy}): {bad}")
    return iterate, trace


for _mod in (apdhg.solver, apdhg, apdhg.cli):
    _mod.solve = _checked_solve

# -- acceptance report ---------------------------------------------------------

ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def solve_log():
    return SOLVE_LOG


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"stepsize invariants checked on {SOLVE_LOG['solves']} solves "
        f"({SOLVE_LOG['adaptive']} adaptive), violations: {len(SOLVE_LOG['violations'])}")
