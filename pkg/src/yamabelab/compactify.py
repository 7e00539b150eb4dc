"""Kelvin-transform compactification of the asymptotically flat end.

The inverted chart uses s = 1/r with the point P at s = 0.  The compactifying
factor is exactly r^(2-n) on the chart's domain (smoothly blended to a
positive even-quartic inside), for which the chart representation collapses
to plain resampling:

    psi_bar(s) = psi(1/s),        base_curv_bar(s) = r^4 R_base(r) | r = 1/s,

so flat space compactifies to the identically flat chart and the chart nodes
are exact reciprocals of the source nodes (round trips are lossless on the
overlap).  The metric deviation k_bar = psi_bar^(N-2) - 1 carries the
weighted-regularity checks at P.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidConfig, InvalidExponent
from .grid import Grid, as_field, gradient_norm, hessian_norm, sphere_area
from .metrics import ConformalMetric, conformal_transform, even_quartic_coeffs, make_metric
from .operators import assemble, constants, restrict

__all__ = ["CompactChart", "RegularityReport", "kelvin_compactify", "decompactify",
           "compactifying_factor", "regularity_check", "quotient_invariance_check"]


@dataclass(frozen=True)
class CompactChart:
    """Inverted-coordinate chart of a compactified AE metric around P (s = 0)."""

    s_grid: Grid
    psi_bar: np.ndarray = field(repr=False)
    base_curv_bar: np.ndarray = field(repr=False)
    phi_c: np.ndarray = field(repr=False)  # compactifying factor on the source grid
    source_grid: Grid = field(repr=False, default=None)
    inner_radius: float = 0.0

    @cached_property
    def kbar(self) -> np.ndarray:
        """Radial metric deviation of the compactified metric from flat."""
        n = self.s_grid.dim
        big_n = constants(n).N
        return self.psi_bar ** (big_n - 2.0) - 1.0

    @cached_property
    def metric(self) -> ConformalMetric:
        """The chart as a metric object on the s-grid (interior outer boundary)."""
        return make_metric(self.s_grid, self.psi_bar, base="euclidean_ae",
                           base_curvature=self.base_curv_bar, tau=-1.0,
                           enforce_decay=False)


def compactifying_factor(grid: Grid, inner_radius: float) -> np.ndarray:
    """r^(2-n) outside inner_radius, positive even-quartic blend inside."""
    if grid.mode != "radial":
        raise InvalidConfig("compactification applies to radial grids")
    n = grid.dim
    r = grid.r
    rc = inner_radius
    p = 2.0 - n
    q0, q2, q4 = even_quartic_coeffs(rc, rc ** p, p * rc ** (p - 1.0),
                                     p * (p - 1.0) * rc ** (p - 2.0))
    out = np.empty_like(r)
    inner = r < rc
    out[inner] = q0 + q2 * r[inner] ** 2 + q4 * r[inner] ** 4
    out[~inner] = r[~inner] ** p
    if np.min(out) <= 0.0:
        raise InvalidConfig(f"compactifying blend lost positivity at r_in={rc}")
    return out


def kelvin_compactify(metric: ConformalMetric, inner_radius: float = 0.5) -> CompactChart:
    """Compactified chart of a radial AE metric on the exterior of inner_radius.

    Chart nodes are the exact reciprocals of the source nodes with r >=
    inner_radius, plus the point P at s = 0 where the factor extends
    continuously by 1 and the transported base curvature by 0.
    """
    grid = metric.grid
    if grid.mode != "radial":
        raise InvalidConfig("kelvin_compactify requires a radial AE metric")
    if not 0.0 < inner_radius < 1.0:
        raise InvalidConfig(f"inner_radius must lie in (0, 1), got {inner_radius}")
    sel = np.flatnonzero(grid.r >= inner_radius)
    if sel.size < 15:
        raise InvalidConfig("too few nodes outside the chart inner radius")
    r_sel = grid.r[sel]
    s_nodes = np.concatenate(([0.0], (1.0 / r_sel)[::-1]))
    s_grid = Grid(dim=grid.dim, mode="radial", r=s_nodes, r_max=float(s_nodes[-1]),
                  stretch=None)

    psi_bar = np.concatenate(([1.0], metric.psi[sel][::-1]))
    rb_bar = np.concatenate(([0.0], (grid.r ** 4 * metric.base_curvature)[sel][::-1]))
    return CompactChart(s_grid=s_grid, psi_bar=psi_bar, base_curv_bar=rb_bar,
                        phi_c=compactifying_factor(grid, inner_radius),
                        source_grid=grid, inner_radius=float(inner_radius))


def decompactify(chart: CompactChart, p: float, grid: Grid | None = None) -> ConformalMetric:
    """AE metric recovered from a compact chart; records tau = n/p - 2.

    The factor is resampled at s = 1/r (exact on reciprocal node sets) for
    r at or outside the chart's inner radius, and held constant inside it:
    the chart only describes the end, and only the overlap is meaningful.
    """
    s_grid = chart.s_grid
    n = s_grid.dim
    if p <= n / 2.0:
        raise InvalidExponent(f"decompactification requires p > n/2, got {p}")
    if p == n:
        raise InvalidExponent("the regularity certificate needs p != n")
    grid = chart.source_grid if grid is None else grid
    tau = n / p - 2.0
    s_query = np.zeros(grid.node_count)
    np.divide(1.0, grid.r, out=s_query, where=grid.r > 0)
    s_query = np.clip(s_query, 0.0, chart.s_grid.r_max)
    psi = np.interp(s_query, s_grid.r, chart.psi_bar)
    rb = np.zeros(grid.node_count)
    pos = grid.r > 0
    rb[pos] = np.interp(s_query[pos], s_grid.r, chart.base_curv_bar) / grid.r[pos] ** 4
    inside = grid.r < chart.inner_radius
    psi[inside] = np.interp(1.0 / chart.inner_radius, s_grid.r, chart.psi_bar)
    rb[inside] = 0.0
    return make_metric(grid, psi, base="euclidean_ae", base_curvature=rb, tau=tau,
                       enforce_decay=True)


@dataclass(frozen=True)
class RegularityReport:
    """Discrete weighted integrals controlling regularity at the point P."""

    p: float
    ball_radius: float
    hardy_integral: float      # int |kbar|^p / s^(2p)
    gradient_integral: float   # int |d kbar|^p / s^p
    hessian_integral: float    # int |d2 kbar|^p
    hardy_ratio: float         # hardy / hessian

    def as_dict(self) -> dict:
        return {"p": self.p, "ball_radius": self.ball_radius,
                "hardy_integral": self.hardy_integral,
                "gradient_integral": self.gradient_integral,
                "hessian_integral": self.hessian_integral,
                "hardy_ratio": self.hardy_ratio}


def regularity_check(chart: CompactChart, p: float,
                     ball_radius: float | None = None) -> RegularityReport:
    """Discrete counterparts of the weighted integrals of k_bar near P.

    Integrates over a coordinate ball at P excluding the innermost shell
    (the excised point); finiteness and stability under refinement stand in
    for the removable-singularity argument.  Report-only.
    """
    n = chart.s_grid.dim
    if p <= n / 2.0:
        raise InvalidExponent(f"regularity check requires p > n/2, got {p}")
    s = chart.s_grid.r
    ball_radius = ball_radius if ball_radius is not None else 0.5 * chart.s_grid.r_max
    kbar = chart.kbar * math.sqrt(n)  # Frobenius norm of the diagonal deviation
    grad = gradient_norm(chart.s_grid, kbar)
    hess = hessian_norm(chart.s_grid, kbar)
    region = chart.s_grid.annulus(s[1], ball_radius)
    with np.errstate(divide="ignore"):
        inv_s = np.where(s > 0, 1.0 / np.maximum(s, 1e-300), 0.0)
    i_hardy = chart.s_grid.integrate(np.abs(kbar) ** p * inv_s ** (2.0 * p), region)
    i_grad = chart.s_grid.integrate(np.abs(grad) ** p * inv_s ** p, region)
    i_hess = chart.s_grid.integrate(np.abs(hess) ** p, region)
    ratio = i_hardy / i_hess if i_hess > 0.0 else (0.0 if i_hardy == 0.0 else math.inf)
    return RegularityReport(p=float(p), ball_radius=float(ball_radius),
                            hardy_integral=float(i_hardy), gradient_integral=float(i_grad),
                            hessian_integral=float(i_hess), hardy_ratio=float(ratio))


def quotient_invariance_check(metric: ConformalMetric, chart: CompactChart,
                              test_fields, delta: float | None = None) -> float:
    """Max relative deviation of the critical quotient across the correspondence.

    Test functions map as u -> u / phi_c between the AE metric and its
    compactification; with the covariance-based assembly both evaluations
    reduce to the same flat form, so the deviation is pure floating-point
    noise.  Fields must be compactly supported away from P and r_max.
    """
    grid = metric.grid
    cst = constants(grid.dim)
    delta = cst.delta_star + 0.5 if delta is None else delta
    forms_ae = assemble(metric, delta)
    gbar = conformal_transform(metric, chart.phi_c, enforce_decay=False)
    forms_bar = assemble(gbar, delta)
    worst = 0.0
    for u in test_fields:
        u = as_field(grid, u)
        q_ae = forms_ae.k_quad(u) / forms_ae.ln_norm(u) ** 2
        v = u / chart.phi_c
        q_bar = forms_bar.k_quad(v) / forms_bar.ln_norm(v) ** 2
        dev = abs(q_ae - q_bar) / max(abs(q_ae), 1e-300)
        worst = max(worst, dev)
    return worst
