import math

import numpy as np
import pytest

from tsirelson import (
    TrialDistribution,
    TsirelsonConstraint,
    chsh_functional,
    double_bound_extremes,
    eight_chsh_polytope,
    single_bound_extremes,
    tilted_functional,
    tilted_maximizer,
)

SQRT2 = math.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20201016)


@pytest.fixture(scope="session")
def chsh_model():
    return single_bound_extremes(TsirelsonConstraint(chsh_functional(), 2 * SQRT2))


@pytest.fixture(scope="session")
def tilted_model():
    return single_bound_extremes(TsirelsonConstraint(tilted_functional(2.0), 2 * math.sqrt(5)))


@pytest.fixture(scope="session")
def double_model():
    return double_bound_extremes(2.0)


@pytest.fixture(scope="session")
def eight_model():
    return eight_chsh_polytope()


@pytest.fixture(scope="session")
def trial_alpha2():
    return TrialDistribution(tilted_maximizer(2.0))


def random_mixture(model, rng, k=None):
    """Random convex combination of ``k`` (default all) extreme points of ``model``."""
    n = len(model)
    idx = rng.choice(n, size=k or n, replace=False)
    w = rng.dirichlet(np.full(idx.size, 0.5))
    return w @ model.points[idx]


def random_nondegenerate_functionals(rng, count):
    """Noise plus a random multiple of a random CHSH version, keeping only LB < NSB."""
    from tsirelson.bell import BellFunctional, chsh_version, compute_bounds
    from tsirelson.errors import DegenerateFunctional

    out = []
    while len(out) < count:
        b = rng.normal(size=16) + rng.uniform(0.5, 3.0) * chsh_version(int(rng.integers(8))).b
        f = BellFunctional(b)
        try:
            compute_bounds(f)
        except DegenerateFunctional:
            continue
        out.append(f)
    return out


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
