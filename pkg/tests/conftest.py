from __future__ import annotations

import numpy as np
import pytest

from multifrac.config import benchmark_config
from multifrac.problem import OrderSet, ProblemSpec, discretize


def one(x):
    return np.ones_like(x)


def make_spec(orders=(0.8, 0.4), q2=2.0, initial=np.sin, **kw) -> ProblemSpec:
    weights = [one] + [lambda x, c=q2: np.full_like(x, c)] * (len(orders) - 1)
    return ProblemSpec(OrderSet(tuple(orders)), weights, initial, **kw)


@pytest.fixture(scope="session")
def bench():
    return benchmark_config()


@pytest.fixture(scope="session")
def bench_disc(bench):
    return discretize(bench.problem, bench.n)


@pytest.fixture(scope="session")
def mode_disc():
    """Two terms, constant q_2 = 2, a = sin x: the solution stays in the first mode."""
    return discretize(make_spec(), 63)


# single-mode reference u(x, t) = phi(t) sin x for mode_disc, from two
# independent high-precision inversions (Talbot and de Hoog) of
# (s^0.8 + 2 s^0.4) / (s (lam_h + s^0.8 + 2 s^0.4)), lam_h = (4/h^2) sin^2(h/2)
MODE_LAMBDA = 0.99979921851159697797
MODE_PHI = {0.1: 0.90657252396207549205, 1.0: 0.70632636342212787918, 5.0: 0.50241509514920469897}


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
