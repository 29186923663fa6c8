import sys

import numpy as np
import pytest
from hypothesis import strategies as st

from harmonia.distributions import validate


@st.composite
def pmfs(draw, max_value=9, max_atoms=5, min_nonzero=1):
    n = draw(st.integers(min_value=max(1, min_nonzero), max_value=max_atoms))
    values = draw(st.lists(st.integers(0, max_value), min_size=n, max_size=n, unique=True))
    if sum(1 for v in values if v > 0) < min_nonzero:
        values = [v + 1 for v in values]
    weights = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    total = sum(weights)
    return validate([(v, w / total) for v, w in zip(values, weights)])


@pytest.fixture
def bern_half():
    return validate([(0, 0.5), (2, 0.5)])


@pytest.fixture
def two_atom():
    return validate([(1, 0.9), (9, 0.1)])


@pytest.fixture
def delta1():
    return validate([(1, 1.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
