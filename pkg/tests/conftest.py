import numpy as np
import pytest

from eqtransport.process import FiniteProcess

ACCEPTANCE_LINES = {}


def random_process(rng, n, T, sparse=False):
    """Random chain on ``n`` states; ``sparse`` zeroes some transitions."""
    init = rng.dirichlet(np.ones(n))
    K = rng.dirichlet(np.ones(n), size=n)
    if sparse and n > 2:
        mask = rng.random((n, n)) < 0.3
        mask[np.arange(n), rng.integers(0, n, n)] = False
        K = np.where(mask, 0.0, K)
        K /= K.sum(axis=1, keepdims=True)
    return FiniteProcess(init, K, T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
