import os
import subprocess
import sys

import numpy as np
import pytest

from yamabelab import kernels
from yamabelab.grid import build_periodic_grid, build_radial_grid, flat_stiffness_apply
from yamabelab.operators import flat_stiffness_matrix


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(42)


def test_lanes_agree_radial(rng):
    if not kernels.HAS_NUMBA:
        pytest.skip("numba unavailable")
    cell = rng.uniform(0.1, 5.0, size=999)
    u = rng.standard_normal(1000)
    a = kernels.lane_impls("numba")["stiffness_apply_radial"](cell, u)
    b = kernels.lane_impls("numpy")["stiffness_apply_radial"](cell, u)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-14)


def test_lanes_agree_periodic(rng):
    if not kernels.HAS_NUMBA:
        pytest.skip("numba unavailable")
    g = build_periodic_grid(3, 1.0, 8)
    u = rng.standard_normal(g.node_count)
    nb = g.neighbor_table
    a = kernels.lane_impls("numba")["stiffness_apply_periodic"](u, nb, 0.125)
    b = kernels.lane_impls("numpy")["stiffness_apply_periodic"](u, nb, 0.125)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_lanes_agree_power_sums(rng):
    if not kernels.HAS_NUMBA:
        pytest.skip("numba unavailable")
    u = rng.standard_normal(2000)
    w = rng.uniform(0.1, 2.0, size=2000)
    for q in (2.0, 2.5, 6.0):
        a = kernels.lane_impls("numba")["abs_power_sum"](u, w, q)
        b = kernels.lane_impls("numpy")["abs_power_sum"](u, w, q)
        assert a == pytest.approx(b, rel=1e-12)
        ga = kernels.lane_impls("numba")["abs_power_grad"](u, w, q)
        gb = kernels.lane_impls("numpy")["abs_power_grad"](u, w, q)
        np.testing.assert_allclose(ga, gb, rtol=1e-12, atol=1e-12)


def test_stiffness_apply_matches_matrix(rng):
    g = build_radial_grid(3, 20.0, 500, 2.0)
    u = rng.standard_normal(g.node_count)
    np.testing.assert_allclose(flat_stiffness_apply(g, u), flat_stiffness_matrix(g) @ u,
                               rtol=1e-12, atol=1e-10)
    gt = build_periodic_grid(3, 2.0, 8)
    v = rng.standard_normal(gt.node_count)
    np.testing.assert_allclose(flat_stiffness_apply(gt, v), flat_stiffness_matrix(gt) @ v,
                               rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("lane", ["numpy", "numba"])
def test_env_flag_selects_lane(lane):
    if lane == "numba" and not kernels.HAS_NUMBA:
        pytest.skip("numba unavailable")
    env = dict(os.environ, YAMABELAB_KERNELS=lane)
    out = subprocess.run(
        [sys.executable, "-c", "from yamabelab import kernels; print(kernels.ACTIVE_LANE)"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == lane
