"""Conformal-class metrics, scalar curvature, and the fixture catalog.

A metric is represented by a conformal factor psi relative to a flat base
structure, together with an optional base scalar-curvature field.  Scalar
curvature follows the conformal transformation law

    R_g = psi^(1-N) * (-a Lap_base psi + R_base psi),

evaluated with the lumped weak Laplacian, so curvature recomputed from the
stored factor is bit-identical to the cached field.

The base-curvature field is what lets the catalog span all three Yamabe
classes: a factor bump alone keeps the energy form conjugate to the flat
Dirichlet form (hence nonnegative), so genuinely Yamabe-negative fixtures
carry their negativity in the base field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BadDecay, InvalidConfig, NonPositiveFactor, UnknownName
from .grid import Grid, Region, as_field, flat_stiffness_apply, weight_rho
from .operators import constants

__all__ = ["ConformalMetric", "CurvatureTarget", "make_metric", "conformal_transform",
           "catalog", "make_target", "target_catalog", "CATALOG_NAMES"]

DECAY_TOL_CELLS = 10.0  # |psi - 1| at r_max must stay below this many mesh widths


@dataclass(frozen=True)
class ConformalMetric:
    """Immutable metric g = psi^(N-2) * base on one grid."""

    grid: Grid
    base: str  # "euclidean_ae" | "flat_torus"
    psi: np.ndarray = field(repr=False)
    base_curvature: np.ndarray = field(repr=False)
    scalar_curvature: np.ndarray = field(repr=False)
    tau: float | None = None

    @cached_property
    def rho(self) -> np.ndarray:
        return weight_rho(self.grid)

    @cached_property
    def vol_weights(self) -> np.ndarray:
        cst = constants(self.grid.dim)
        return self.grid.weights * self.psi ** cst.N

    def integrate(self, values: np.ndarray, region: Region | None = None) -> float:
        """Integrate samples against the metric volume element."""
        if region is None:
            return float(self.vol_weights @ values)
        scaled = values * self.psi ** constants(self.grid.dim).N
        return self.grid.integrate(scaled, region)


def _compute_scalar_curvature(grid: Grid, psi: np.ndarray,
                              base_curvature: np.ndarray) -> np.ndarray:
    cst = constants(grid.dim)
    lin = cst.a * flat_stiffness_apply(grid, psi) / grid.weights + base_curvature * psi
    return psi ** (1.0 - cst.N) * lin


def make_metric(grid: Grid, psi, base: str | None = None,
                base_curvature=None, tau: float | None = None,
                enforce_decay: bool = True) -> ConformalMetric:
    """Validate the factor and build a metric with derived scalar curvature.

    enforce_decay=False admits factors that do not approach 1 at the outer
    radius; compactified charts ending at an interior boundary need this.
    """
    psi = as_field(grid, psi)
    if base is None:
        base = "euclidean_ae" if grid.mode == "radial" else "flat_torus"
    if base not in ("euclidean_ae", "flat_torus"):
        raise InvalidConfig(f"unknown base tag {base!r}")
    if (base == "euclidean_ae") != (grid.mode == "radial"):
        raise InvalidConfig(f"base {base!r} does not match grid mode {grid.mode!r}")
    if np.min(psi) <= 0.0:
        raise NonPositiveFactor(f"conformal factor must be positive, min = {np.min(psi)}")
    if grid.mode == "radial":
        drift = abs(psi[-1] - 1.0)
        if enforce_decay and drift > DECAY_TOL_CELLS * grid.spacing:
            raise BadDecay(f"|psi - 1| = {drift:.3e} at r_max exceeds decay tolerance")
        if tau is None:
            tau = -1.0
        if tau >= 0.0:
            raise InvalidConfig(f"decay tag tau must be negative, got {tau}")
    else:
        tau = None
    base_curvature = (np.zeros(grid.node_count) if base_curvature is None
                      else as_field(grid, base_curvature))
    r_field = _compute_scalar_curvature(grid, psi, base_curvature)
    return ConformalMetric(grid=grid, base=base, psi=psi, base_curvature=base_curvature,
                           scalar_curvature=r_field, tau=tau)


def conformal_transform(metric: ConformalMetric, phi,
                        enforce_decay: bool = True) -> ConformalMetric:
    """Metric with factor psi * phi; same conformal class and base structure."""
    phi = as_field(metric.grid, phi)
    if np.min(phi) <= 0.0:
        raise NonPositiveFactor(f"transform factor must be positive, min = {np.min(phi)}")
    return make_metric(metric.grid, metric.psi * phi, base=metric.base,
                       base_curvature=metric.base_curvature, tau=metric.tau,
                       enforce_decay=enforce_decay)


# ---------------------------------------------------------------------------
# catalog of test metrics
# ---------------------------------------------------------------------------

def even_quartic_coeffs(rc: float, f: float, f1: float, f2: float) -> tuple:
    """Coefficients (q0, q2, q4) of q = q0 + q2 r^2 + q4 r^4 matching
    value/first/second derivatives (f, f1, f2) at rc.

    Even powers pin the odd derivatives at the origin, so the blend is the
    degree-5 polynomial match with the radial regularity conditions built in.
    """
    q4 = (f2 - f1 / rc) / (8.0 * rc ** 2)
    q2 = (f1 - 4.0 * q4 * rc ** 3) / (2.0 * rc)
    q0 = f - q2 * rc ** 2 - q4 * rc ** 4
    return q0, q2, q4


def _schwarzschild_factor(r: np.ndarray, mass: float, moll_radius: float) -> np.ndarray:
    """1 + m/(2r) outside moll_radius, blended smoothly inside.

    The blend matches value and first two derivatives at the junction and has
    vanishing odd derivatives at the origin, keeping the factor C^2 and
    positive; the exterior region keeps the harmonic factor exactly.
    """
    rc = moll_radius
    m = mass
    q0, q2, q4 = even_quartic_coeffs(rc, 1.0 + m / (2.0 * rc), -m / (2.0 * rc ** 2),
                                     m / rc ** 3)
    out = np.empty_like(r)
    inner = r < rc
    out[inner] = q0 + q2 * r[inner] ** 2 + q4 * r[inner] ** 4
    out[~inner] = 1.0 + m / (2.0 * r[~inner])
    return out


CATALOG_NAMES = ("euclidean", "schwarzschild", "negative_well", "torus_flat", "torus_negative")


def catalog(name: str, grid: Grid, params: dict | None = None) -> ConformalMetric:
    """Named fixture metrics spanning the three Yamabe classes."""
    params = dict(params or {})
    ones = np.ones(grid.node_count)
    if name == "euclidean":
        return make_metric(grid, ones, tau=params.pop("tau", -1.0))
    if name == "schwarzschild":
        mass = float(params.pop("mass", 1.0))
        moll = float(params.pop("moll_radius", 0.5))
        psi = _schwarzschild_factor(grid.r, mass, moll)
        return make_metric(grid, psi, tau=params.pop("tau", -1.0))
    if name == "negative_well":
        amp = float(params.pop("amplitude", 40.0))
        center = float(params.pop("center", 3.0))
        width = float(params.pop("width", 1.0))
        well = -amp * np.exp(-((grid.r - center) / width) ** 2)
        return make_metric(grid, ones, base_curvature=well, tau=params.pop("tau", -1.0))
    if name == "torus_flat":
        return make_metric(grid, ones)
    if name == "torus_negative":
        amp = float(params.pop("amplitude", 1.0))
        ripple = float(params.pop("ripple", 0.5))
        bump = float(params.pop("factor_bump", 0.2))
        cosprod = _axis_cos_product(grid)
        base_curv = -amp * (1.0 + ripple * cosprod)
        psi = 1.0 + bump * cosprod
        return make_metric(grid, psi, base_curvature=base_curv)
    raise UnknownName(f"unknown catalog metric {name!r}; have {CATALOG_NAMES}")


def _axis_cos_product(grid: Grid) -> np.ndarray:
    xs = grid.coordinates
    out = np.ones(grid.node_count)
    for ax in range(grid.dim):
        out *= np.cos(2.0 * np.pi * xs[:, ax] / grid.box_length)
    return out


# ---------------------------------------------------------------------------
# prescribed-curvature targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvatureTarget:
    """Non-positive target curvature with its derived zero set."""

    grid: Grid
    rprime: np.ndarray = field(repr=False)
    zero_tol: float
    zero_set: Region


def make_target(grid: Grid, rprime, zero_tol: float = 1e-12) -> CurvatureTarget:
    rprime = as_field(grid, rprime)
    if np.max(rprime) > 0.0:
        raise InvalidConfig(f"target curvature must be non-positive, max = {np.max(rprime)}")
    scale = float(np.max(np.abs(rprime)))
    zero_mask = np.abs(rprime) <= zero_tol * scale if scale > 0.0 else np.ones_like(rprime, bool)
    if grid.mode == "periodic":
        zero_set = grid.region_from_mask(zero_mask)
    else:
        zero_set = Region(grid, intervals=_mask_to_intervals(grid, zero_mask))
    return CurvatureTarget(grid=grid, rprime=rprime, zero_tol=zero_tol, zero_set=zero_set)


def _mask_to_intervals(grid: Grid, mask: np.ndarray) -> tuple:
    """Contiguous node runs of a radial mask as closed intervals."""
    r = grid.r
    intervals = []
    start = None
    for i, inside in enumerate(mask):
        if inside and start is None:
            start = i
        elif not inside and start is not None:
            intervals.append((r[start], r[i - 1]))
            start = None
    if start is not None:
        intervals.append((r[start], r[-1]))
    return tuple((a, b) for a, b in intervals if b > a)


def target_catalog(name: str, grid: Grid, params: dict | None = None) -> CurvatureTarget:
    """Named target curvatures used by the classification experiments."""
    params = dict(params or {})
    zero_tol = float(params.pop("zero_tol", 1e-12))
    if name == "zero":
        return make_target(grid, np.zeros(grid.node_count), zero_tol)
    if grid.mode == "radial":
        r = grid.r
        if name == "gaussian":
            amp = float(params.pop("amplitude", 1.0))
            width = float(params.pop("width", 1.0))
            return make_target(grid, -amp * np.exp(-(r / width) ** 2), zero_tol)
        if name == "annulus_well":
            amp = float(params.pop("amplitude", 1.0))
            center = float(params.pop("center", 10.0))
            width = float(params.pop("width", 1.0))
            return make_target(grid, -amp * np.exp(-((r - center) / width) ** 2), zero_tol)
        if name == "ball_bump":
            amp = float(params.pop("amplitude", 1.0))
            radius = float(params.pop("radius", 0.5))
            return make_target(grid, -amp * _compact_bump(r, radius), zero_tol)
    else:
        if name == "negative_uniform":
            amp = float(params.pop("amplitude", 1.0))
            ripple = float(params.pop("ripple", 0.3))
            rp = -amp * (1.0 + ripple * _axis_cos_product(grid))
            return make_target(grid, rp, zero_tol)
        if name == "small_zero_set":
            amp = float(params.pop("amplitude", 1.0))
            radius = float(params.pop("radius", 0.2))
            dist2 = _periodic_dist2(grid)
            rp = -amp * np.minimum(1.0, np.maximum(0.0, dist2 / radius ** 2 - 1.0))
            return make_target(grid, rp, zero_tol)
        if name == "small_support":
            amp = float(params.pop("amplitude", 1.0))
            radius = float(params.pop("radius", 0.2))
            dist2 = _periodic_dist2(grid)
            rp = -amp * np.maximum(0.0, 1.0 - dist2 / radius ** 2)
            return make_target(grid, rp, zero_tol)
    raise UnknownName(f"unknown target {name!r} for grid mode {grid.mode!r}")


def _compact_bump(r: np.ndarray, radius: float) -> np.ndarray:
    """Smooth bump supported exactly in [0, radius]."""
    out = np.zeros_like(r)
    inside = r < radius
    x = r[inside] / radius
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x ** 2))
    return out


def _periodic_dist2(grid: Grid) -> np.ndarray:
    """Squared periodic distance to the box center."""
    center = np.full(grid.dim, grid.box_length / 2.0)
    delta = np.abs(grid.coordinates - center[None, :])
    delta = np.minimum(delta, grid.box_length - delta)
    return (delta ** 2).sum(axis=1)
