import numpy as np
import pytest

from banach_oc.dynamics import ControlTrajectory, TimeGrid, integrate_forward
from banach_oc.cost import total_cost
from banach_oc.spectral import CircleGrid
from banach_oc.systems import AmariSystem, LqToyParams, LqToySystem


class DecaySystem(LqToySystem):
    """x' = -x + u with the toy's terminal cost; a linear flow with known solution."""

    def drift(self, t, x):
        return -x

    def drift_jacobian_adjoint(self, t, x, p):
        return -p


def cost_of(system, u):
    return total_cost(system, integrate_forward(system, system.x0, u), u).total


def direct_convolution(w, y):
    n = len(w)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return 2 * np.pi / n * (w[idx] @ y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def amari64():
    return AmariSystem(grid=CircleGrid(64))


@pytest.fixture(scope="session")
def amari128():
    return AmariSystem(grid=CircleGrid(128))


@pytest.fixture
def lq():
    return LqToySystem(LqToyParams(alpha=1.0, target=1.0, horizon=1.0))


@pytest.fixture
def lq_grid():
    return TimeGrid(1.0, 64)


def zeros(system, grid):
    return ControlTrajectory.zeros(grid, system.control_dim)
