import numpy as np
import pytest

from qball.fields import RadialGrid
from qball.potential import default_potential


@pytest.fixture(scope="session")
def grid():
    return RadialGrid(40.0, 4000)


@pytest.fixture(scope="session")
def spec():
    return default_potential()


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)


def smooth_random_state(grid, rng, q=0.0, decay=8.0):
    """Decaying random fields built from a few low-order radial bumps."""
    from qball.fields import FieldState
    r = grid.r
    env = np.exp(-(r / decay) ** 2)

    def field(scale=1.0):
        c = rng.normal(size=4)
        osc = (c[0] + c[1] * np.cos(0.3 * r) + c[2] * np.sin(0.17 * r)
               + c[3] * np.cos(0.41 * r))
        return scale * env * osc

    return FieldState(grid, field(), field(0.5), field(0.8), field(0.3),
                      field(0.2), q)
