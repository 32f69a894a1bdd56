import numpy as np
import pytest

from proxitem.certificates import reference_certificate
from proxitem.problem import builtin_instance
from proxitem.solvers import run_method


def run_builtin(name, method, horizon, seed=0, **kw):
    inst = builtin_instance(name, **kw)
    cert = reference_certificate(inst, 1e-12)
    x0 = 5.0 * np.random.default_rng(seed).standard_normal(inst.dim)
    return run_method(inst, method, x0, horizon, seed=seed), cert


@pytest.fixture
def lasso_item():
    return run_builtin("lasso-sc", "prox_item", 60)


@pytest.fixture
def lasso_tmm():
    return run_builtin("lasso-sc", "prox_tmm", 60)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
