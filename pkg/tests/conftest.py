import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ymlab import lie_algebra as la
from ymlab.lattice_forms import FormField, Grid

settings.register_profile(
    "lab", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture]
)
settings.load_profile("lab")


def smooth_connection(K, X, Y, Z):
    j = K[0]
    return np.stack([0.5 * np.sin(X + 0.3 * a + j) * np.cos(Y - 0.5 * j) + 0.3 * np.cos(Z + a * j) for a in range(3)])


def smooth_variation(K, X, Y, Z):
    j = K[0]
    return np.stack([0.5 * np.cos(X - Y + a + 2 * j) + 0.3 * np.sin(Z + Y * (a % 2) + j) for a in range(3)])


def smooth_su2_pair(n):
    g = la.su2()
    grid = Grid(n)
    return (
        FormField.from_function(1, grid, g, smooth_connection),
        FormField.from_function(1, grid, g, smooth_variation),
    )


def random_form(degree, grid, group, rng, scale=1.0):
    f = FormField(degree, grid, group)
    f.data = scale * rng.standard_normal(f.data.shape)
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def su2():
    return la.su2()


@pytest.fixture(scope="session")
def u1():
    return la.u1()
