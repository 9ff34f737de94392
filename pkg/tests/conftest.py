import numpy as np
import pytest

from sparsejsr import BoundOptions, MatrixSet
from sparsejsr.poly import Support
from sparsejsr.basis import standard_basis

GOLDEN = MatrixSet([[[1.0, 1.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 1.0]]])
PHI = (1 + 5**0.5) / 2

# f = x1^4 + x2^4 + x3^4 + x1 x2 x3^2 + x1 x2^2 x3, basis N^3_2
EXAMPLE1_SUPPORT = Support.of([(4, 0, 0), (0, 4, 0), (0, 0, 4), (1, 1, 2), (1, 2, 1)])


@pytest.fixture
def example1():
    return EXAMPLE1_SUPPORT, standard_basis(3, 2)


@pytest.fixture
def fast_opts():
    # no lower bound: most tests only look at ub
    return BoundOptions(lower_maxlen=None)


def rng_matrices(seed, n, m=1, scale=1.0):
    rng = np.random.default_rng(seed)
    return MatrixSet(scale * rng.uniform(-1, 1, (n, n)) for _ in range(m))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (len(k), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
