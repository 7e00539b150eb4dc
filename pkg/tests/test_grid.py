import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from yamabelab.errors import InvalidConfig, InvalidDimension, InvalidExponent, OutOfDomain
from yamabelab.grid import (NormSpec, Region, build_periodic_grid, build_radial_grid,
                            weight_rho, weighted_norm, weighted_volume)


def test_constructor_echo():
    g = build_radial_grid(3, 100.0, 4000, 2.0)
    assert g.r[0] == 0.0
    assert g.r[-1] == pytest.approx(100.0, abs=0.0)
    assert np.all(np.diff(g.r) > 0)
    assert np.all(g.weights > 0)


def test_invalid_grid_configs():
    with pytest.raises(InvalidDimension):
        build_radial_grid(2, 10.0, 100)
    with pytest.raises(InvalidConfig):
        build_radial_grid(3, 0.5, 100)
    with pytest.raises(InvalidConfig):
        build_radial_grid(3, 10.0, 8)
    with pytest.raises(InvalidConfig):
        build_periodic_grid(3, -1.0, 8)


def test_ball_volume_exact():
    g = build_radial_grid(3, 40.0, 2000, 2.0)
    vol = g.integrate(np.ones(g.node_count), g.ball(1.0))
    assert vol == pytest.approx(4.0 * math.pi / 3.0, rel=1e-12)


def test_total_volume_exact():
    g = build_radial_grid(3, 40.0, 2000, 2.0)
    assert g.weights.sum() == pytest.approx(4.0 * math.pi / 3.0 * 40.0 ** 3, rel=1e-12)


def test_quadrature_refinement_order():
    # smooth non-polynomial integrand over an off-node ball
    exact = 4.0 * math.pi * quad(lambda r: math.exp(-r) * r * r, 0.0, 1.3,
                                 epsabs=1e-14, epsrel=1e-13)[0]
    errs = []
    for m in (500, 1000, 2000):
        g = build_radial_grid(3, 40.0, m, 2.0)
        got = g.integrate(np.exp(-g.r), g.ball(1.3))
        errs.append(abs(got - exact) / exact)
    order1 = math.log2(errs[0] / errs[1])
    order2 = math.log2(errs[1] / errs[2])
    assert min(order1, order2) >= 1.9


def test_periodic_grid_weights():
    g = build_periodic_grid(3, 2.0 * math.pi, 32)
    assert g.node_count == 32 ** 3
    assert np.allclose(g.weights, (2.0 * math.pi / 32) ** 3, rtol=0, atol=0)


def test_weight_rho_radial():
    g = build_radial_grid(3, 100.0, 4000, 2.0)
    rho = weight_rho(g)
    assert rho[0] == 1.0
    assert rho[-1] == pytest.approx(math.sqrt(1.0 + 100.0 ** 2))
    assert np.all(rho >= 1.0)
    # asymptotic to r at the far end
    assert rho[-1] / g.r[-1] == pytest.approx(1.0, rel=1e-4)


def test_weight_rho_periodic():
    g = build_periodic_grid(3, 2.0 * math.pi, 8)
    assert np.all(weight_rho(g) == 1.0)


# ---------------------------------------------------------------------------
# region algebra
# ---------------------------------------------------------------------------

def test_region_identities(grid_std):
    g = grid_std
    ball2 = g.ball(2.0)
    assert g.exterior(2.0).complement() == ball2
    assert np.array_equal(g.exterior(2.0).complement().mask, ball2.mask)
    assert g.ball(3.0).intersect(g.exterior(1.0)) == g.annulus(1.0, 3.0)
    assert g.annulus(1.0, 2.0).union(g.annulus(2.0, 3.0)) == g.annulus(1.0, 3.0)


def test_region_out_of_domain(grid_std):
    with pytest.raises(OutOfDomain):
        grid_std.ball(1000.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 39.0), st.floats(0.1, 39.9)),
                min_size=0, max_size=4),
       st.lists(st.tuples(st.floats(0.0, 39.0), st.floats(0.1, 39.9)),
                min_size=0, max_size=4))
def test_region_boolean_algebra(intervals_a, intervals_b):
    g = test_region_boolean_algebra.grid
    mk = lambda ivs: Region(g, intervals=tuple((a, a + w) for a, w in ivs
                                               if a + w <= g.r_max))
    A, B = mk(intervals_a), mk(intervals_b)
    whole, empty = g.whole(), g.empty()
    # double complement, De Morgan, complements, absorption on node indicators
    assert np.array_equal(A.complement().complement().mask, A.mask)
    assert np.array_equal(A.union(B).complement().mask,
                          A.complement().intersect(B.complement()).mask)
    assert np.array_equal(A.union(A.complement()).mask, whole.mask)
    assert np.array_equal(A.union(empty).mask, A.mask)
    assert np.array_equal(A.intersect(whole).mask, A.mask)
    assert np.array_equal(A.union(A.intersect(B)).mask, A.mask)


test_region_boolean_algebra.grid = build_radial_grid(3, 40.0, 800, 2.0)


# ---------------------------------------------------------------------------
# weighted volumes and norms
# ---------------------------------------------------------------------------

def test_weighted_volume_empty(grid_std):
    assert weighted_volume(grid_std.empty(), 6.0) == 0.0


def test_weighted_volume_bad_exponent(grid_std):
    with pytest.raises(InvalidExponent):
        weighted_volume(grid_std.ball(1.0), 3.0)


def test_weighted_volume_oracle():
    # adaptive quadrature oracle on the truncated domain (the region is
    # exterior(2) = [2, r_max] on the discretized manifold)
    g = build_radial_grid(3, 15.0, 8000, 2.0)
    got = weighted_volume(g.exterior(2.0), 6.0)
    oracle = 4.0 * math.pi * quad(lambda r: r * r * (1.0 + r * r) ** -3, 2.0, 15.0,
                                  epsabs=1e-15, epsrel=1e-14)[0]
    assert got == pytest.approx(oracle, rel=1e-6)


def test_weighted_volume_monotone(grid_std):
    rng = np.random.default_rng(3)
    for _ in range(10):
        r1, r2 = sorted(rng.uniform(0.5, 30.0, size=2))
        v1 = weighted_volume(grid_std.ball(r1), 5.0)
        v2 = weighted_volume(grid_std.ball(r2), 5.0)
        assert v1 <= v2 + 1e-15


def test_weighted_norm_zero(grid_std):
    spec = NormSpec(k=1, p=2.0, delta=0.0)
    assert weighted_norm(np.zeros(grid_std.node_count), spec, grid_std) == 0.0


def test_weighted_norm_bump_oracle():
    g = build_radial_grid(3, 15.0, 8000, 2.0)
    center, width = 0.5, 0.2
    u = np.where(g.r < 1.0, np.exp(-((g.r - center) / width) ** 2), 0.0)
    got = weighted_norm(u, NormSpec(k=0, p=2.0, delta=0.0), g)
    integrand = lambda r: (math.exp(-((r - center) / width) ** 2)
                           * (1.0 + r * r) ** (-0.75)) ** 2 * r * r
    oracle = math.sqrt(4.0 * math.pi * quad(integrand, 0.0, 1.0,
                                            epsabs=1e-15, epsrel=1e-14)[0])
    assert got == pytest.approx(oracle, rel=1e-6)


def test_weighted_norm_decaying_oracle():
    # f = (1+r^2)^-1, k=0, p=2, delta=-1/2: weight rho^(-delta-n/p) = rho^(-1)
    g = build_radial_grid(3, 15.0, 8000, 2.0)
    f = (1.0 + g.r ** 2) ** -1
    got = weighted_norm(f, NormSpec(k=0, p=2.0, delta=-0.5), g)
    oracle = math.sqrt(4.0 * math.pi * quad(
        lambda r: r * r * (1.0 + r * r) ** -3, 0.0, 15.0,
        epsabs=1e-13, epsrel=1e-12)[0])
    assert math.isfinite(got)
    assert got == pytest.approx(oracle, rel=1e-6)


def test_norm_monotone_in_delta(grid_std):
    rng = np.random.default_rng(11)
    from conftest import random_bump
    for _ in range(20):
        u = random_bump(grid_std, rng)
        d1, d2 = sorted(rng.uniform(-1.0, 1.0, size=2))
        n1 = weighted_norm(u, NormSpec(k=0, p=2.0, delta=d1), grid_std)
        n2 = weighted_norm(u, NormSpec(k=0, p=2.0, delta=d2), grid_std)
        assert n1 >= n2 * (1.0 - 1e-12)


def test_empirical_poincare_constant():
    # min over random bumps of |grad u|_2 / |u|_{2,delta*} bounded away from 0
    # and stable under refinement
    from conftest import random_bump
    from yamabelab.grid import gradient_norm
    ratios = {}
    for m in (1500, 3000):
        g = build_radial_grid(3, 40.0, m, 2.0)
        rng = np.random.default_rng(5)
        vals = []
        for _ in range(50):
            u = random_bump(g, rng)
            num = math.sqrt(g.integrate(gradient_norm(g, u) ** 2))
            den = weighted_norm(u, NormSpec(k=0, p=2.0, delta=-0.5), g)
            vals.append(num / den)
        ratios[m] = min(vals)
    assert ratios[3000] > 1e-3
    assert abs(ratios[3000] - ratios[1500]) <= 0.2 * abs(ratios[1500])


def test_norm_spec_validation():
    with pytest.raises(InvalidConfig):
        NormSpec(k=3)
    with pytest.raises(InvalidExponent):
        NormSpec(k=0, p=1.0)
