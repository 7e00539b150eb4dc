import math

import numpy as np
import pytest

from yamabelab.grid import build_periodic_grid, build_radial_grid
from yamabelab.metrics import catalog

# closed form of the critical quotient at the extremal bubble on flat R^3,
# 6 * 2^(2/3) * pi^(4/3) = 6 * (2 pi^2)^(2/3); derived analytically pre-build
BUBBLE_REF = 6.0 * 2.0 ** (2.0 / 3.0) * math.pi ** (4.0 / 3.0)


@pytest.fixture(scope="session")
def grid_std():
    """Workhorse radial grid: n=3, moderate extent and resolution."""
    return build_radial_grid(3, 40.0, 3000, 2.0)


@pytest.fixture(scope="session")
def grid_fine():
    return build_radial_grid(3, 40.0, 6000, 2.0)


@pytest.fixture(scope="session")
def grid_coarse():
    return build_radial_grid(3, 40.0, 1500, 2.0)


@pytest.fixture(scope="session")
def grid_torus():
    return build_periodic_grid(3, 2.0 * math.pi, 16)


@pytest.fixture(scope="session")
def euclidean(grid_std):
    return catalog("euclidean", grid_std)


@pytest.fixture(scope="session")
def schwarzschild(grid_std):
    return catalog("schwarzschild", grid_std, {"mass": 1.0})


@pytest.fixture(scope="session")
def negative_well(grid_std):
    return catalog("negative_well", grid_std, {"amplitude": 40.0})


@pytest.fixture(scope="session")
def torus_flat(grid_torus):
    return catalog("torus_flat", grid_torus)


@pytest.fixture(scope="session")
def torus_negative(grid_torus):
    return catalog("torus_negative", grid_torus)


def random_bump(grid, rng, support=None):
    """Smooth compactly supported radial bump with random center/width."""
    lo, hi = support if support is not None else (0.5, 0.5 * grid.r_max)
    center = rng.uniform(lo + 0.2 * (hi - lo), hi - 0.2 * (hi - lo))
    width = rng.uniform(0.05, 0.25) * (hi - lo)
    u = np.exp(-((grid.r - center) / width) ** 2)
    u[grid.r > hi] = 0.0
    u[-1] = 0.0
    return u
