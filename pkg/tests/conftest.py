import numpy as np
import pytest
from hypothesis import settings

from robos.gp import GPPosterior, GridSpec
from robos.kernels import KernelSpec, ProductKernel
from robos.simplex import MmdMetric

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def dense_posterior(K, obs, y, lam):
    """Posterior mean and variance on the whole grid by a direct dense solve."""
    obs = list(obs)
    if not obs:
        return np.zeros(len(K)), np.diag(K).copy()
    Kt = K[np.ix_(obs, obs)] + lam * np.eye(len(obs))
    kx = K[:, obs]
    mean = kx @ np.linalg.solve(Kt, np.asarray(y))
    var = np.diag(K) - np.einsum("ij,ji->i", kx, np.linalg.solve(Kt, kx.T))
    return mean, var


def random_metric(rng, n, lengthscale=None):
    contexts = np.sort(rng.uniform(-3.0, 3.0, n))
    while n > 1 and np.min(np.diff(contexts)) < 0.3:
        contexts = np.sort(rng.uniform(-3.0, 3.0, n))
    ls = rng.uniform(0.5, 2.0) if lengthscale is None else lengthscale
    return MmdMetric.from_kernel(KernelSpec("rbf", (ls,)), contexts)


@pytest.fixture
def small_grid():
    grid = GridSpec(np.linspace(0, 1, 4), np.linspace(-1, 1, 3))
    kernel = ProductKernel(KernelSpec("rbf", (0.4,)), KernelSpec("rbf", (0.8,)))
    return grid, kernel


@pytest.fixture
def posterior(small_grid):
    grid, kernel = small_grid
    return GPPosterior(grid, kernel, noise=0.1, rkhs_bound=1.0, delta=0.1)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
