import sys

import numpy as np
import pytest

from sarinfluence.graph import random_adjacency, row_standardize
from sarinfluence.model import PriorConfig, SarDataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_data(rng):
    n, k = 12, 2
    A, _ = random_adjacency(n, rng)
    W = row_standardize(A)
    X = rng.normal(size=(n, k))
    y = rng.normal(size=n)
    return SarDataset(y, X, W)


@pytest.fixture
def default_prior():
    return PriorConfig.from_vector([0.01, 0.01, 100])


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
