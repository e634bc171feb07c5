import numpy as np
import pytest

from pivchol import Domain, make_kernel, tensor_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


@pytest.fixture
def matern_half():
    return make_kernel("matern", nu=0.5, ell=0.5)


@pytest.fixture
def line_grid():
    """2001 points on [-1, 1]."""
    return tensor_grid(Domain.cube(-1, 1, 1), 2001)


def dense_schur_diag(kernel, points, pivot_points):
    """Oracle: K(x, x) - k(x)^T K(S, S)^-1 k(x) by a dense solve."""
    G = kernel.matrix(pivot_points)
    k = kernel.matrix(points, pivot_points)
    return kernel.diagonal(points) - np.sum(k * np.linalg.solve(G, k.T).T, axis=1)


# one line per acceptance criterion, shown in the terminal summary even when output is captured
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[key])
