"""Quadratic forms of the conformal-class energy and weighted masses.

The primary ("covariant") assembly realizes the energy through the conformal
covariance identity

    int a |grad u|^2_g + R_g u^2 dV_g  =  int a |grad (psi u)|^2_base
                                          + R_base (psi u)^2 dV_base

for g = psi^(N-2) * base, which makes conformal invariance of the assembled
form exact at machine precision.  A direct assembly (flat stiffness weighted
by psi^2 plus an R_g mass term) is provided for cross-validation; the two
agree to O(h^2).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import BadDelta, InvalidConfig, InvalidDimension
from .grid import (Grid, Region, _radial_moments, flat_stiffness_apply,
                   periodic_stencil_coeff, sphere_area)

__all__ = ["Constants", "constants", "FormSet", "assemble", "restrict",
           "apply_conformal_laplacian", "flat_stiffness_matrix", "direct_stiffness_matrix"]


@dataclass(frozen=True)
class Constants:
    """Dimension-derived constants of the conformal Laplacian."""

    n: int
    a: float
    N: float
    delta_star: float


def constants(n: int) -> Constants:
    """Exact rational-derived constants a = 4(n-1)/(n-2), N = 2n/(n-2), delta* = (2-n)/2."""
    if n < 3:
        raise InvalidDimension(f"dimension must be >= 3, got {n}")
    a = Fraction(4 * (n - 1), n - 2)
    big_n = Fraction(2 * n, n - 2)
    dstar = Fraction(2 - n, 2)
    return Constants(n=n, a=float(a), N=float(big_n), delta_star=float(dstar))


def flat_stiffness_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse flat Dirichlet-form matrix S with u.S(v) ~ int grad u . grad v dV."""
    m = grid.node_count
    if grid.mode == "radial":
        c = grid.stiffness_cells
        diag = np.zeros(m)
        diag[:-1] += c
        diag[1:] += c
        return sp.diags([-c, diag, -c], offsets=[-1, 0, 1], format="csr")
    coeff = periodic_stencil_coeff(grid)
    nb = grid.neighbor_table
    deg = nb.shape[1]
    rows = np.repeat(np.arange(m), deg)
    adj = sp.coo_matrix((np.ones(m * deg), (rows, nb.ravel())), shape=(m, m))
    return (coeff * (sp.identity(m) * deg - adj)).tocsr()


def direct_stiffness_matrix(grid: Grid, coeff_field: np.ndarray) -> sp.csr_matrix:
    """Stiffness with a nodal coefficient field c: u.S_c(v) ~ int c grad u . grad v dV.

    Radial cells integrate the linear interpolant of c against r^{n-1} exactly;
    periodic edges use the mean of the endpoint coefficients.
    """
    m = grid.node_count
    if grid.mode == "radial":
        r = grid.r
        dl = np.diff(r)
        m0, m1 = _radial_moments(grid.dim, r[:-1], r[1:])
        cl, cr = coeff_field[:-1], coeff_field[1:]
        slope = (cr - cl) / dl
        cell = sphere_area(grid.dim) * (cl * m0 + slope * (m1 - r[:-1] * m0)) / dl ** 2
        diag = np.zeros(m)
        diag[:-1] += cell
        diag[1:] += cell
        return sp.diags([-cell, diag, -cell], offsets=[-1, 0, 1], format="csr")
    coeff = periodic_stencil_coeff(grid)
    nb = grid.neighbor_table
    deg = nb.shape[1]
    rows = np.repeat(np.arange(m), deg)
    cols = nb.ravel()
    edge = 0.5 * (coeff_field[rows] + coeff_field[cols])
    adj = sp.coo_matrix((edge, (rows, cols)), shape=(m, m))
    diag = sp.diags(np.asarray(adj.sum(axis=1)).ravel())
    return (coeff * (diag - adj)).tocsr()


@dataclass(frozen=True)
class FormSet:
    """Assembled forms of one metric at one weight delta, with an active DOF set.

    The stiffness form K is the full conformal energy (gradient plus scalar
    curvature term); M_delta is the diagonal weighted mass rho^(-2 delta - n)
    with the metric volume element; M is the plain metric mass.  Restriction
    to a region shrinks the active set; fields supported off the active set
    are excluded from every quadratic form by construction.
    """

    grid: Grid
    delta: float
    psi: np.ndarray
    base_curvature: np.ndarray
    rho: np.ndarray
    active: np.ndarray
    assembly: str = "covariant"
    empty: bool = False

    @cached_property
    def vol_weights(self) -> np.ndarray:
        """Metric volume element quadrature: w * psi^N."""
        cst = constants(self.grid.dim)
        return self.grid.weights * self.psi ** cst.N

    @cached_property
    def mdelta_diag(self) -> np.ndarray:
        """Diagonal of the weighted mass: w * rho^(-2 delta - n) * psi^N."""
        return self.vol_weights * self.rho ** (-2.0 * self.delta - self.grid.dim)

    @cached_property
    def scalar_curvature(self) -> np.ndarray:
        cst = constants(self.grid.dim)
        lin = cst.a * flat_stiffness_apply(self.grid, self.psi) / self.grid.weights \
            + self.base_curvature * self.psi
        return self.psi ** (1.0 - cst.N) * lin

    @cached_property
    def k_matrix_full(self) -> sp.csr_matrix:
        cst = constants(self.grid.dim)
        if self.assembly == "covariant":
            s_mat = flat_stiffness_matrix(self.grid)
            d_psi = sp.diags(self.psi)
            core = cst.a * (d_psi @ s_mat @ d_psi)
            mass = self.base_curvature * self.psi ** 2 * self.grid.weights
        else:
            s_mat = direct_stiffness_matrix(self.grid, self.psi ** 2)
            core = cst.a * s_mat
            mass = self.scalar_curvature * self.vol_weights
        return (core + sp.diags(mass)).tocsr()

    @cached_property
    def k_matrix(self) -> sp.csr_matrix:
        """Stiffness restricted to active DOFs."""
        idx = np.flatnonzero(self.active)
        return self.k_matrix_full[np.ix_(idx, idx)].tocsr()

    @cached_property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    # -- matrix-free applications (hot paths use the kernel lanes) ----------

    def apply_k(self, u: np.ndarray) -> np.ndarray:
        """K u as a full-length coefficient vector (weak form against hats)."""
        cst = constants(self.grid.dim)
        if self.assembly == "covariant":
            chi = self.psi * u
            out = cst.a * self.psi * flat_stiffness_apply(self.grid, chi)
            out += self.base_curvature * self.psi ** 2 * u * self.grid.weights
            return out
        return self.k_matrix_full @ u

    def k_quad(self, u: np.ndarray) -> float:
        """Quadratic form K(u, u)."""
        return float(u @ self.apply_k(u))

    def k_bilinear(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(v @ self.apply_k(u))

    def mdelta_quad(self, u: np.ndarray) -> float:
        return float(np.sum(self.mdelta_diag * u * u))

    def mass_quad(self, u: np.ndarray) -> float:
        return float(np.sum(self.vol_weights * u * u))

    def lncritical(self, u: np.ndarray) -> float:
        """L^N functional int |u|^N dV_g."""
        cst = constants(self.grid.dim)
        return kernels.abs_power_sum(u, self.vol_weights, cst.N)

    def lncritical_grad(self, u: np.ndarray) -> np.ndarray:
        cst = constants(self.grid.dim)
        return kernels.abs_power_grad(u, self.vol_weights, cst.N)

    def ln_norm(self, u: np.ndarray) -> float:
        cst = constants(self.grid.dim)
        return self.lncritical(u) ** (1.0 / cst.N)

    def zero_off_active(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.node_count)
        out[self.active] = u[self.active]
        return out


def _interior_mask(grid: Grid) -> np.ndarray:
    mask = np.ones(grid.node_count, dtype=bool)
    if grid.mode == "radial":
        mask[-1] = False  # Dirichlet truncation at r_max
    return mask


def assemble(metric, delta: float, assembly: str = "covariant") -> FormSet:
    """Assemble the forms of a conformal metric at weight delta > delta*."""
    cst = constants(metric.grid.dim)
    if delta <= cst.delta_star:
        raise BadDelta(f"delta must exceed delta* = {cst.delta_star}, got {delta}")
    if assembly not in ("covariant", "direct"):
        raise InvalidConfig(f"unknown assembly {assembly!r}")
    return FormSet(grid=metric.grid, delta=float(delta), psi=metric.psi,
                   base_curvature=metric.base_curvature, rho=metric.rho,
                   active=_interior_mask(metric.grid), assembly=assembly)


def restrict(forms: FormSet, region: Region) -> FormSet:
    """Restrict the active DOF set to a region (test functions supported in V)."""
    if region.grid is not forms.grid:
        raise InvalidConfig("region and forms live on different grids")
    active = forms.active & region.mask
    return replace(forms, active=active, empty=not bool(active.any()))


def apply_conformal_laplacian(metric, u: np.ndarray) -> np.ndarray:
    """(-a Lap_g + R_g) u as a field, via the covariance identity.

    Symmetric with respect to the metric volume inner product by construction:
    v . M_g (L u) = K(u, v).
    """
    cst = constants(metric.grid.dim)
    psi = metric.psi
    chi = psi * u
    weak = cst.a * flat_stiffness_apply(metric.grid, chi) / metric.grid.weights \
        + metric.base_curvature * chi
    return psi ** (1.0 - cst.N) * weak
