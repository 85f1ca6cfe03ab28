import sys

import numpy as np
import pytest
from hypothesis import settings

from pairfuse.core import make_dataset
from pairfuse.simulate import StudySpec, gen_example

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20160801)


@pytest.fixture(scope="session")
def ex1_alpha1():
    """One Example-1 dataset (n=100, alpha=1) shared by slow-ish tests."""
    return gen_example(StudySpec("1", alpha=1.0, seed=11), 0)


@pytest.fixture(scope="session")
def ex1_alpha2():
    return gen_example(StudySpec("1", alpha=2.0, seed=12), 0)


def random_dataset(rng, n, p):
    X = rng.standard_normal((n, p)) if p else None
    return make_dataset(rng.standard_normal(n), X)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
