"""Discretization grids, the weight function rho, regions, and weighted integrals.

Two grid modes cover the two model geometries:

* ``radial`` -- a single asymptotically Euclidean end, reduced to the radial
  coordinate on [0, r_max] with a graded node map r = r_max * xi**stretch.
  Quadrature integrates the piecewise-linear interpolant against the measure
  omega_{n-1} r^{n-1} dr exactly (hat-function moments), so node weights are
  strictly positive (including at r = 0) and the total ball volume is exact.
* ``periodic`` -- a flat torus [0, L)^n with uniform voxel weights (L/m)^n.

Regions are unions of closed radial intervals (radial mode) or boolean voxel
masks (periodic mode).  Interval algebra follows the regular-closed-set
convention: degenerate intervals are dropped and touching intervals merge, so
the algebra is Boolean on node indicators away from interval endpoints that
coincide with nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import InvalidConfig, InvalidDimension, InvalidExponent, MissingDerivatives, OutOfDomain

__all__ = [
    "Grid",
    "Region",
    "NormSpec",
    "build_radial_grid",
    "build_periodic_grid",
    "build_grid",
    "weight_rho",
    "weighted_norm",
    "weighted_volume",
    "sphere_area",
]

MIN_NODES = 16


def sphere_area(n: int) -> float:
    """Surface area of the unit (n-1)-sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def _radial_moments(n: int, c0, c1):
    """Integrals of r^{n-1} and r^n over [c0, c1] (exact)."""
    m0 = (c1 ** n - c0 ** n) / n
    m1 = (c1 ** (n + 1) - c0 ** (n + 1)) / (n + 1)
    return m0, m1


@dataclass(frozen=True)
class Grid:
    """Immutable discretization of one model manifold."""

    dim: int
    mode: str
    r: np.ndarray | None = field(default=None, repr=False)
    r_max: float | None = None
    stretch: float | None = None
    box_length: float | None = None
    nodes_per_axis: int | None = None

    @property
    def node_count(self) -> int:
        if self.mode == "radial":
            return self.r.shape[0]
        return self.nodes_per_axis ** self.dim

    @cached_property
    def weights(self) -> np.ndarray:
        """Per-node quadrature weights of the flat base volume, strictly positive."""
        if self.mode == "periodic":
            h = self.box_length / self.nodes_per_axis
            return np.full(self.node_count, h ** self.dim)
        n, r = self.dim, self.r
        omega = sphere_area(n)
        w = np.zeros_like(r)
        dl = np.diff(r)
        # rising half-hats on [r_{i-1}, r_i], falling half-hats on [r_i, r_{i+1}]
        m0, m1 = _radial_moments(n, r[:-1], r[1:])
        w[1:] += (m1 - r[:-1] * m0) / dl
        w[:-1] += (r[1:] * m0 - m1) / dl
        return omega * w

    @cached_property
    def stiffness_cells(self) -> np.ndarray:
        """Radial P1 cell coefficients: int_cell r^{n-1} dr / dr^2 (times sphere area)."""
        if self.mode != "radial":
            raise InvalidConfig("stiffness_cells is radial-only")
        r = self.r
        m0, _ = _radial_moments(self.dim, r[:-1], r[1:])
        return sphere_area(self.dim) * m0 / np.diff(r) ** 2

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """Periodic (node_count, 2n) table of nearest-neighbor flat indices."""
        if self.mode != "periodic":
            raise InvalidConfig("neighbor_table is periodic-only")
        m, n = self.nodes_per_axis, self.dim
        idx = np.arange(self.node_count).reshape((m,) * n)
        cols = []
        for ax in range(n):
            cols.append(np.roll(idx, 1, axis=ax).ravel())
            cols.append(np.roll(idx, -1, axis=ax).ravel())
        return np.stack(cols, axis=1).astype(np.int64)

    @cached_property
    def axis_coords(self) -> np.ndarray:
        if self.mode != "periodic":
            raise InvalidConfig("axis_coords is periodic-only")
        h = self.box_length / self.nodes_per_axis
        return h * np.arange(self.nodes_per_axis)

    @cached_property
    def coordinates(self) -> np.ndarray:
        """(node_count, dim) Cartesian coordinates; radial mode returns (m, 1) radii."""
        if self.mode == "radial":
            return self.r[:, None]
        grids = np.meshgrid(*([self.axis_coords] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def spacing(self) -> float:
        """Representative mesh width (max radial cell / uniform voxel edge)."""
        if self.mode == "radial":
            return float(np.max(np.diff(self.r)))
        return self.box_length / self.nodes_per_axis

    # -- region constructors ------------------------------------------------

    def whole(self) -> "Region":
        if self.mode == "radial":
            return Region(self, intervals=((0.0, float(self.r_max)),))
        return Region(self, mask_arr=np.ones(self.node_count, dtype=bool))

    def empty(self) -> "Region":
        if self.mode == "radial":
            return Region(self, intervals=())
        return Region(self, mask_arr=np.zeros(self.node_count, dtype=bool))

    def ball(self, radius: float, center=None) -> "Region":
        if self.mode == "radial":
            self._check_radius(radius)
            return Region(self, intervals=((0.0, float(radius)),))
        center = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        delta = np.abs(self.coordinates - center[None, :])
        delta = np.minimum(delta, self.box_length - delta)
        return Region(self, mask_arr=(delta ** 2).sum(axis=1) <= radius ** 2)

    def annulus(self, r_inner: float, r_outer: float) -> "Region":
        if self.mode != "radial":
            raise InvalidConfig("annulus requires a radial grid")
        self._check_radius(r_inner)
        self._check_radius(r_outer)
        if r_inner >= r_outer:
            raise InvalidConfig(f"annulus needs r_inner < r_outer, got [{r_inner}, {r_outer}]")
        return Region(self, intervals=((float(r_inner), float(r_outer)),))

    def exterior(self, radius: float) -> "Region":
        if self.mode != "radial":
            raise InvalidConfig("exterior requires a radial grid")
        self._check_radius(radius)
        return Region(self, intervals=((float(radius), float(self.r_max)),))

    def region_from_mask(self, mask: np.ndarray) -> "Region":
        if self.mode != "periodic":
            raise InvalidConfig("voxel regions require a periodic grid")
        mask = np.asarray(mask, dtype=bool).ravel()
        if mask.shape[0] != self.node_count:
            raise InvalidConfig("mask length does not match the grid")
        return Region(self, mask_arr=mask.copy())

    def _check_radius(self, radius: float) -> None:
        if not 0.0 <= radius <= self.r_max:
            raise OutOfDomain(f"radius {radius} outside [0, {self.r_max}]")

    # -- integration ---------------------------------------------------------

    def integrate(self, values: np.ndarray, region: "Region | None" = None) -> float:
        """Integrate node samples over a region of the flat base manifold.

        Radial mode integrates the piecewise-linear interpolant against
        omega r^{n-1} dr exactly, including fractional boundary cells, which
        keeps region integrals second-order in the mesh regardless of where
        interval endpoints fall.  Periodic mode is a masked voxel sum.
        """
        values = np.asarray(values, dtype=float)
        if region is None:
            return float(self.weights @ values)
        if self.mode == "periodic":
            return float(self.weights[region.mask] @ values[region.mask])
        n, r = self.dim, self.r
        omega = sphere_area(n)
        total = 0.0
        for a, b in region.intervals:
            lo = np.searchsorted(r, a, side="right") - 1
            hi = np.searchsorted(r, b, side="left")
            lo = max(lo, 0)
            # cells [r_k, r_{k+1}] for k in [lo, hi-1] overlap [a, b]
            ks = np.arange(lo, hi)
            if ks.size == 0:
                continue
            c0 = np.maximum(r[ks], a)
            c1 = np.minimum(r[ks + 1], b)
            keep = c1 > c0
            ks, c0, c1 = ks[keep], c0[keep], c1[keep]
            if ks.size == 0:
                continue
            m0, m1 = _radial_moments(n, c0, c1)
            fl, fr = values[ks], values[ks + 1]
            slope = (fr - fl) / (r[ks + 1] - r[ks])
            total += float(np.sum(fl * m0 + slope * (m1 - r[ks] * m0)))
        return omega * total


def build_radial_grid(dim: int, r_max: float, node_count: int, stretch: float = 2.0) -> Grid:
    if dim < 3:
        raise InvalidDimension(f"dimension must be >= 3, got {dim}")
    if r_max <= 1.0:
        raise InvalidConfig(f"r_max must exceed 1, got {r_max}")
    if node_count < MIN_NODES:
        raise InvalidConfig(f"need at least {MIN_NODES} nodes, got {node_count}")
    if stretch < 1.0:
        raise InvalidConfig(f"stretch must be >= 1, got {stretch}")
    xi = np.linspace(0.0, 1.0, node_count)
    r = r_max * xi ** stretch
    return Grid(dim=dim, mode="radial", r=r, r_max=float(r_max), stretch=float(stretch))


def build_periodic_grid(dim: int, box_length: float, nodes_per_axis: int) -> Grid:
    if dim < 3:
        raise InvalidDimension(f"dimension must be >= 3, got {dim}")
    if box_length <= 0.0:
        raise InvalidConfig(f"box_length must be positive, got {box_length}")
    if nodes_per_axis ** dim < MIN_NODES or nodes_per_axis < 4:
        raise InvalidConfig(f"nodes_per_axis {nodes_per_axis} too small")
    return Grid(dim=dim, mode="periodic", box_length=float(box_length),
                nodes_per_axis=int(nodes_per_axis))


def build_grid(config: dict) -> Grid:
    """Build a grid from a plain config mapping (see config module for schema)."""
    mode = config.get("mode")
    if mode == "radial":
        return build_radial_grid(config["dimension"], config["r_max"],
                                 config["node_count"], config.get("stretch", 2.0))
    if mode == "periodic":
        return build_periodic_grid(config["dimension"], config["box_length"],
                                   config["nodes_per_axis"])
    raise InvalidConfig(f"unknown grid mode {mode!r}")


def weight_rho(grid: Grid) -> np.ndarray:
    """Samples of the weight function rho (>= 1, asymptotic to r on the end)."""
    if grid.mode == "periodic":
        return np.ones(grid.node_count)
    return np.sqrt(1.0 + grid.r ** 2)


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

def _normalize_intervals(intervals) -> tuple:
    ivs = sorted((float(a), float(b)) for a, b in intervals if float(b) > float(a))
    merged: list[list[float]] = []
    for a, b in ivs:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return tuple((a, b) for a, b in merged)


@dataclass(frozen=True)
class Region:
    """Measurable subset of the model manifold (interval union or voxel mask)."""

    grid: Grid
    intervals: tuple = None
    mask_arr: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.grid.mode == "radial":
            object.__setattr__(self, "intervals", _normalize_intervals(self.intervals))
            for a, b in self.intervals:
                if a < 0.0 or b > self.grid.r_max * (1 + 1e-12):
                    raise OutOfDomain(f"interval [{a}, {b}] outside [0, {self.grid.r_max}]")

    @cached_property
    def mask(self) -> np.ndarray:
        """Boolean node-indicator vector."""
        if self.grid.mode == "periodic":
            return self.mask_arr
        r = self.grid.r
        out = np.zeros(r.shape[0], dtype=bool)
        for a, b in self.intervals:
            out |= (r >= a) & (r <= b)
        return out

    def is_empty(self) -> bool:
        if self.grid.mode == "periodic":
            return not bool(self.mask_arr.any())
        return len(self.intervals) == 0

    def complement(self) -> "Region":
        if self.grid.mode == "periodic":
            return Region(self.grid, mask_arr=~self.mask_arr)
        pieces = []
        cursor = 0.0
        for a, b in self.intervals:
            if a > cursor:
                pieces.append((cursor, a))
            cursor = max(cursor, b)
        if cursor < self.grid.r_max:
            pieces.append((cursor, self.grid.r_max))
        return Region(self.grid, intervals=tuple(pieces))

    def intersect(self, other: "Region") -> "Region":
        self._check_same_grid(other)
        if self.grid.mode == "periodic":
            return Region(self.grid, mask_arr=self.mask_arr & other.mask_arr)
        pieces = []
        for a1, b1 in self.intervals:
            for a2, b2 in other.intervals:
                a, b = max(a1, a2), min(b1, b2)
                if b > a:
                    pieces.append((a, b))
        return Region(self.grid, intervals=tuple(pieces))

    def union(self, other: "Region") -> "Region":
        self._check_same_grid(other)
        if self.grid.mode == "periodic":
            return Region(self.grid, mask_arr=self.mask_arr | other.mask_arr)
        return Region(self.grid, intervals=self.intervals + other.intervals)

    def _check_same_grid(self, other: "Region") -> None:
        if other.grid is not self.grid:
            raise InvalidConfig("regions live on different grids")

    def __eq__(self, other):
        if not isinstance(other, Region) or other.grid is not self.grid:
            return NotImplemented
        if self.grid.mode == "periodic":
            return bool(np.array_equal(self.mask_arr, other.mask_arr))
        return self.intervals == other.intervals

    __hash__ = None


# ---------------------------------------------------------------------------
# fields and weighted norms
# ---------------------------------------------------------------------------

def as_field(grid: Grid, values) -> np.ndarray:
    """Validate and return a scalar field: one finite sample per node."""
    arr = np.asarray(values, dtype=float)
    if arr.shape != (grid.node_count,):
        raise InvalidConfig(f"field shape {arr.shape} does not match grid ({grid.node_count},)")
    if not np.all(np.isfinite(arr)):
        raise InvalidConfig("field contains non-finite samples")
    return arr


def radial_derivative(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Second-order df/dr on the graded radial grid."""
    return np.gradient(f, grid.r, edge_order=2)


def gradient_norm(grid: Grid, f: np.ndarray) -> np.ndarray:
    """|grad f| samples of the flat base metric."""
    if grid.mode == "radial":
        return np.abs(radial_derivative(grid, f))
    shape = (grid.nodes_per_axis,) * grid.dim
    h = grid.box_length / grid.nodes_per_axis
    arr = f.reshape(shape)
    acc = np.zeros(shape)
    for ax in range(grid.dim):
        d = (np.roll(arr, -1, axis=ax) - np.roll(arr, 1, axis=ax)) / (2 * h)
        acc += d * d
    return np.sqrt(acc).ravel()


def hessian_norm(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Frobenius norm |grad^2 f| of the flat Hessian.

    Radial functions have Hessian eigenvalues f'' (radial) and f'/r with
    multiplicity n-1; the r -> 0 limit of f'/r is f''(0) by smoothness.
    """
    if grid.mode == "radial":
        d1 = radial_derivative(grid, f)
        d2 = np.gradient(d1, grid.r, edge_order=2)
        tang = np.empty_like(d1)
        tang[1:] = d1[1:] / grid.r[1:]
        tang[0] = d2[0]
        return np.sqrt(d2 ** 2 + (grid.dim - 1) * tang ** 2)
    shape = (grid.nodes_per_axis,) * grid.dim
    h = grid.box_length / grid.nodes_per_axis
    arr = f.reshape(shape)
    acc = np.zeros(shape)
    for ax1 in range(grid.dim):
        for ax2 in range(grid.dim):
            if ax1 == ax2:
                d = (np.roll(arr, -1, axis=ax1) - 2 * arr + np.roll(arr, 1, axis=ax1)) / h ** 2
            else:
                d = (np.roll(np.roll(arr, -1, axis=ax1), -1, axis=ax2)
                     - np.roll(np.roll(arr, -1, axis=ax1), 1, axis=ax2)
                     - np.roll(np.roll(arr, 1, axis=ax1), -1, axis=ax2)
                     + np.roll(np.roll(arr, 1, axis=ax1), 1, axis=ax2)) / (4 * h ** 2)
            acc += d * d
    return np.sqrt(acc).ravel()


@dataclass(frozen=True)
class NormSpec:
    """Weighted Sobolev norm parameters: derivative order k, exponent p, weight delta."""

    k: int = 0
    p: float = 2.0
    delta: float = 0.0

    def __post_init__(self):
        if self.k not in (0, 1, 2):
            raise InvalidConfig(f"derivative order k must be 0, 1 or 2, got {self.k}")
        if not 1.0 < self.p < math.inf:
            raise InvalidExponent(f"integrability p must lie in (1, inf), got {self.p}")


def weighted_norm(f, spec: NormSpec, grid: Grid, rho: np.ndarray | None = None,
                  gradient: np.ndarray | None = None,
                  hessian: np.ndarray | None = None,
                  region: Region | None = None) -> float:
    """Sum over j <= k of || rho^(-delta - n/p + j) |grad^j f| ||_{L^p}.

    Derivative magnitude fields may be supplied; otherwise they are computed by
    second-order finite differences on the grid.
    """
    f = as_field(grid, f)
    rho = weight_rho(grid) if rho is None else rho
    n, p, delta = grid.dim, spec.p, spec.delta
    levels = [np.abs(f)]
    if spec.k >= 1:
        levels.append(np.abs(gradient) if gradient is not None else gradient_norm(grid, f))
    if spec.k >= 2:
        levels.append(np.abs(hessian) if hessian is not None else hessian_norm(grid, f))
    total = 0.0
    for j, mag in enumerate(levels):
        if not np.all(np.isfinite(mag)):
            raise MissingDerivatives(f"derivative order {j} is not finite on this grid")
        integrand = (rho ** (-delta - n / p + j) * mag) ** p
        total += grid.integrate(integrand, region) ** (1.0 / p)
    return float(total)


def weighted_volume(region: Region, mu: float, rho: np.ndarray | None = None) -> float:
    """Vol_mu(V) = integral over V of rho^(-mu); requires mu > n."""
    grid = region.grid
    if mu <= grid.dim:
        raise InvalidExponent(f"weighted volume requires mu > n = {grid.dim}, got {mu}")
    rho = weight_rho(grid) if rho is None else rho
    return grid.integrate(rho ** (-mu), region)


# ---------------------------------------------------------------------------
# flat-base differential operators
# ---------------------------------------------------------------------------

def periodic_stencil_coeff(grid: Grid) -> float:
    h = grid.box_length / grid.nodes_per_axis
    return h ** (grid.dim - 2)


def flat_stiffness_apply(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Apply the flat Dirichlet-form operator S, so that u.S(v) ~ int grad u . grad v dV.

    Radial: P1 chain with exact r^{n-1} cell moments.  Periodic: graph stencil
    h^{n-2} (2n u_i - sum of neighbors).  Constants are in the kernel of both.
    """
    if grid.mode == "radial":
        return kernels.stiffness_apply_radial(grid.stiffness_cells, u)
    return kernels.stiffness_apply_periodic(u, grid.neighbor_table, periodic_stencil_coeff(grid))


def flat_laplacian_weak(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Lumped weak Laplacian: (Delta u)_i ~ -(S u)_i / w_i."""
    return -flat_stiffness_apply(grid, u) / grid.weights


def flat_laplacian_fd(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Pointwise finite-difference Laplacian, independent of the weak form.

    Radial: u'' + (n-1) u'/r on the nonuniform node set, with the regularity
    limit n u''(0) at the origin.  Used as the cross-validation discretization;
    on periodic grids the standard stencil coincides with the weak operator.
    """
    if grid.mode == "periodic":
        return flat_laplacian_weak(grid, u)
    r, n = grid.r, grid.dim
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    d2 = 2.0 * (u[:-2] / (hm * (hm + hp)) - u[1:-1] / (hm * hp) + u[2:] / (hp * (hm + hp)))
    d1 = (-hp / (hm * (hm + hp))) * u[:-2] \
        + ((hp - hm) / (hm * hp)) * u[1:-1] \
        + (hm / (hp * (hm + hp))) * u[2:]
    out = np.empty_like(u)
    out[1:-1] = d2 + (n - 1) * d1 / r[1:-1]
    # origin: u'(0) = 0, limit value n u''(0) from the symmetric parabola through r_1
    out[0] = n * 2.0 * (u[1] - u[0]) / r[1] ** 2
    # outer boundary: second-order one-sided copy of the interior formula
    out[-1] = out[-2]
    return out
