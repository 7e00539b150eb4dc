"""Weighted first eigenvalues, Yamabe-invariant estimates, and sign verdicts.

lambda_delta computes the smallest generalized eigenvalue of the pencil
(K, M_delta) on the active DOFs of a region via shift-and-invert, with the
shift kept at the current Rayleigh quotient and two random nonnegative
restarts.  yamabe_invariant minimizes the critical-exponent quotient by
preconditioned projected gradient descent on the unit-L^N sphere with an
Armijo line search, optionally annealed through subcritical exponents.
classify_sign combines both into a Positive / Null / Negative verdict; the
underlying sign-equivalence theorem makes disagreement a bug detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BadDelta, InconsistentOutcome
from .operators import FormSet, assemble, constants, restrict

__all__ = ["SpectralResult", "YamabeEstimate", "SignVerdict", "DescentOptions",
           "lambda_delta", "yamabe_invariant", "classify_sign"]


@dataclass(frozen=True)
class SpectralResult:
    """Smallest weighted eigenvalue on a region, with its minimizer."""

    lam: float  # +inf for measure-zero regions
    eigenfunction: np.ndarray | None = field(repr=False, default=None)
    delta: float = 0.0
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.lam)


@dataclass(frozen=True)
class YamabeEstimate:
    """Certified upper bound on the Yamabe invariant of a region."""

    y_value: float  # +inf for measure-zero regions
    minimizer: np.ndarray | None = field(repr=False, default=None)
    trace: tuple = ()
    q_schedule: tuple = ()
    stationarity: float = 0.0
    converged: bool = True

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.y_value)


@dataclass(frozen=True)
class SignVerdict:
    verdict: str  # "Positive" | "Null" | "Negative"
    lambdas: dict
    y_estimate: float
    null_band: float


def _lambda_floor(forms: FormSet) -> float:
    """Lower bound B >= 0 with K + B M_delta positive semidefinite.

    The gradient part of K is a conjugated flat Dirichlet form, hence PSD; only
    the base-curvature mass can push eigenvalues negative.
    """
    act = forms.active
    cmass = forms.base_curvature[act] * forms.psi[act] ** 2 * forms.grid.weights[act]
    md = forms.mdelta_diag[act]
    return float(max(0.0, np.max(-cmass / md, initial=0.0)))


def _ir_scale(forms: FormSet) -> float:
    """Coarse infrared eigenvalue scale of the grid (band floors, shift pads)."""
    cst = constants(forms.grid.dim)
    if forms.grid.mode == "radial":
        return cst.a * (math.pi / forms.grid.r_max) ** 2
    return cst.a * (2.0 * math.pi / forms.grid.box_length) ** 2


def _rayleigh(kmat, md, v):
    return float(v @ (kmat @ v)) / float(v @ (md * v))


class _PencilSolver:
    """Shift-and-invert machinery for one restricted pencil (K, M_delta)."""

    def __init__(self, kmat, md, tol, max_iter):
        self.kmat = kmat
        self.md = md
        self.tol = tol
        self.max_iter = max_iter
        self.kscale = float(np.median(np.abs(kmat.diagonal()))) or 1.0
        self.iters = 0

    def residual(self, lam, v):
        kv = self.kmat @ v
        r = kv - lam * (self.md * v)
        scale = max(float(np.linalg.norm(kv)),
                    abs(lam) * float(np.linalg.norm(self.md * v)),
                    self.kscale * float(np.linalg.norm(v)))
        return float(np.linalg.norm(r)) / scale

    def factor(self, sigma):
        return spla.splu((self.kmat - sigma * sp.diags(self.md)).tocsc())

    def inverse_power(self, lu, v, sweeps):
        """Fixed-shift inverse power; converges to the eigenvalue nearest the shift."""
        lam = _rayleigh(self.kmat, self.md, v)
        for _ in range(sweeps):
            w = lu.solve(self.md * v)
            nrm = math.sqrt(abs(float(w @ (self.md * w))))
            if not np.isfinite(nrm) or nrm == 0.0:
                break
            v = w / nrm
            lam_new = _rayleigh(self.kmat, self.md, v)
            self.iters += 1
            done = abs(lam_new - lam) <= 1e-3 * self.tol * (abs(lam_new) + self.kscale)
            lam = lam_new
            if done or self.residual(lam, v) <= self.tol:
                break
        return lam, v

    def refine(self, lam, v, sigma_floor):
        """Rayleigh-shift restarts of the inverse power until the residual passes."""
        resid = self.residual(lam, v)
        attempts = 0
        while resid > self.tol and attempts < 4 and self.iters < self.max_iter:
            pad = 1e-6 * (abs(lam) + self.kscale * 1e-6) + 1e-300
            sigma = lam - pad
            lu = self.factor(sigma)
            lam, v = self.inverse_power(lu, v, sweeps=12)
            resid = self.residual(lam, v)
            attempts += 1
        return lam, v, resid


def lambda_delta(metric, region, delta: float, tol: float = 1e-9,
                 max_iter: int = 200, restarts: int = 2,
                 forms: FormSet | None = None) -> SpectralResult:
    """Smallest eigenvalue of the weighted pencil restricted to a region.

    Measure-zero regions return the +inf flag.  The eigenfunction is replaced
    by its absolute value and renormalized to unit weighted mass (the absolute
    value of a minimizer is again a minimizer), and vanishes off the region
    exactly.
    """
    if forms is None:
        forms = assemble(metric, delta)
    forms = restrict(forms, region)
    if forms.empty:
        return SpectralResult(lam=math.inf, delta=delta)
    act = forms.active_indices
    kmat = forms.k_matrix
    md = forms.mdelta_diag[act]
    n_act = act.shape[0]

    if n_act == 1:
        lam = float(kmat[0, 0]) / float(md[0])
        u = np.zeros(forms.grid.node_count)
        u[act] = 1.0
        nrm = math.sqrt(forms.mdelta_quad(u))
        return SpectralResult(lam=lam, eigenfunction=u / nrm, delta=delta,
                              iterations=0, residual=0.0, converged=True)

    solver = _PencilSolver(kmat, md, tol, max_iter)
    sigma0 = -_lambda_floor(forms) - 1e-3 * _ir_scale(forms)
    lam, v = math.inf, None
    v0 = np.random.default_rng(9).random(n_act) + 0.5  # deterministic ARPACK start
    try:
        vals, vecs = spla.eigsh(kmat, k=1, M=sp.diags(md), sigma=sigma0, which="LM", v0=v0)
        lam, v = float(vals[0]), vecs[:, 0]
    except Exception:
        pass
    if v is None:
        rng = np.random.default_rng(0)
        lu0 = solver.factor(sigma0)
        v0 = rng.random(n_act) + 1e-3
        lam, v = solver.inverse_power(lu0, v0, sweeps=40)
    lam, v, resid = solver.refine(lam, v, sigma0)

    # restarts from random nonnegative vectors; a restart wins only by finding
    # a strictly smaller eigenvalue (ties are irrelevant, only the min matters)
    rng = np.random.default_rng(12345)
    lu0 = None
    for _ in range(restarts):
        if resid <= tol:
            break
        if lu0 is None:
            lu0 = solver.factor(sigma0)
        v0 = rng.random(n_act) + 1e-3
        lam2, v2 = solver.inverse_power(lu0, v0, sweeps=40)
        lam2, v2, resid2 = solver.refine(lam2, v2, sigma0)
        gap = 1e-9 * (abs(lam) + solver.kscale * 1e-3)
        if lam2 < lam - gap or (resid2 < resid and lam2 <= lam + gap):
            lam, v, resid = lam2, v2, resid2

    u = np.zeros(forms.grid.node_count)
    u[act] = np.abs(v)
    nrm = math.sqrt(forms.mdelta_quad(u))
    if nrm > 0.0:
        u /= nrm
    return SpectralResult(lam=lam, eigenfunction=u, delta=delta,
                          iterations=solver.iters, residual=resid,
                          converged=bool(resid <= tol))


@dataclass(frozen=True)
class DescentOptions:
    """Controls for the constrained quotient descent."""

    q_schedule: tuple = ()  # subcritical exponents to anneal through, ending below N
    max_iter: int = 400
    tol: float = 1e-7
    armijo: float = 1e-4
    step0: float = 1.0
    delta_init: float | None = None  # weight used for the eigenfunction initializer


def _descend_quotient(forms: FormSet, q: float, u: np.ndarray, lu, opts: DescentOptions):
    """Minimize K(u)/||u||_q^2 on the unit q-sphere; returns (u, value, resid, iters, stalled)."""
    vol = forms.vol_weights
    from . import kernels

    def qnorm_pow(x):
        return kernels.abs_power_sum(x, vol, q)

    def normalize(x):
        s = qnorm_pow(x)
        return x / s ** (1.0 / q) if s > 0.0 else x

    u = normalize(forms.zero_off_active(u))
    ku = forms.apply_k(u)
    val = float(u @ ku)
    resid = math.inf
    stalled = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        # constrained gradient on the unit q-sphere: K u - val |u|^{q-1} sgn(u) vol
        res = ku - val * (kernels.abs_power_grad(u, vol, q) / q)
        res[~forms.active] = 0.0
        scale = max(float(np.linalg.norm(ku)), abs(val), 1e-300)
        resid = float(np.linalg.norm(res)) / scale
        if resid <= opts.tol:
            break
        d = np.zeros_like(u)
        d[forms.active] = lu.solve(res[forms.active])
        slope = float(res @ d)
        if slope <= 0.0:
            d = res
            slope = float(res @ res)
        alpha = opts.step0
        ok = False
        for _ in range(40):
            cand = normalize(u - alpha * d)
            kcand = forms.apply_k(cand)
            vcand = float(cand @ kcand)
            if vcand <= val - opts.armijo * alpha * slope:
                u, ku, val = cand, kcand, vcand
                ok = True
                break
            alpha *= 0.5
        if not ok:
            stalled = True
            break
    return u, val, resid, it, stalled


def yamabe_invariant(metric, region, opts: DescentOptions | None = None,
                     forms: FormSet | None = None) -> YamabeEstimate:
    """Certified upper bound on y(V) by projected descent from the eigenfunction.

    The reported value is the quotient of the final iterate recomputed from
    scratch; stationarity is the scaled norm of the constrained gradient.
    """
    opts = opts or DescentOptions()
    cst = constants(metric.grid.dim)
    delta0 = opts.delta_init if opts.delta_init is not None else cst.delta_star + 0.5
    if forms is None:
        forms = assemble(metric, delta0)
    forms = restrict(forms, region)
    if forms.empty:
        return YamabeEstimate(y_value=math.inf)

    eig = lambda_delta(metric, region, delta0, forms=forms)
    u = eig.eigenfunction.copy()
    act = forms.active_indices
    md = forms.mdelta_diag[act]
    shift = _lambda_floor(forms) + 1e-2 * _ir_scale(forms)
    lu = spla.splu((forms.k_matrix + shift * sp.diags(md)).tocsc())

    trace = []
    schedule = tuple(opts.q_schedule) + (cst.N,)
    resid = math.inf
    stalled = False
    for q in schedule:
        if not (2.0 < q <= cst.N):
            raise BadDelta(f"exponent schedule must lie in (2, N], got {q}")
        u, val, resid, iters, stalled = _descend_quotient(forms, q, u, lu, opts)
        trace.append((float(q), float(val), float(resid), int(iters)))

    # independent recomputation of the reported value
    nrm = forms.ln_norm(u)
    u_final = u / nrm if nrm > 0.0 else u
    y_val = forms.k_quad(u_final) / forms.ln_norm(u_final) ** 2
    return YamabeEstimate(y_value=float(y_val), minimizer=u_final, trace=tuple(trace),
                          q_schedule=schedule, stationarity=resid,
                          converged=not stalled and resid <= opts.tol * 10.0)


def classify_sign(metric, region, deltas, null_band: float | None = None,
                  tol: float = 1e-9, y_opts: DescentOptions | None = None) -> SignVerdict:
    """Positive / Null / Negative verdict from per-delta eigenvalues plus the y estimate.

    All requested deltas must exceed delta*.  Signs must agree across deltas
    and with the Yamabe estimate; disagreement beyond the band raises
    InconsistentOutcome, which signals a discretization failure rather than a
    mathematical possibility.
    """
    cst = constants(metric.grid.dim)
    deltas = tuple(float(d) for d in deltas)
    if not deltas:
        raise BadDelta("need at least one delta")
    lams = {}
    forms0 = None
    for d in deltas:
        res = lambda_delta(metric, region, d, tol=tol)
        lams[d] = res.lam
        if forms0 is None:
            forms0 = assemble(metric, d)
    yest = yamabe_invariant(metric, region, opts=y_opts)

    finite = [abs(v) for v in lams.values() if math.isfinite(v)]
    ir = _ir_scale(restrict(forms0, region)) if finite else 1.0
    if null_band is None:
        band = 1e-6 * max(float(np.median(finite)) if finite else 0.0, ir)
    else:
        band = float(null_band)
    y_band = band if null_band is not None else 1e-6 * max(abs(yest.y_value)
                                                           if math.isfinite(yest.y_value)
                                                           else 0.0, cst.a)

    def sgn(value, b):
        if math.isinf(value):
            return 1
        if value > b:
            return 1
        if value < -b:
            return -1
        return 0

    signs = {sgn(v, band) for v in lams.values()}
    signs.add(sgn(yest.y_value, y_band))
    if len(signs) != 1:
        raise InconsistentOutcome(
            f"sign disagreement across deltas/y: lambdas={lams}, y={yest.y_value}, "
            f"band={band}")
    verdict = {1: "Positive", 0: "Null", -1: "Negative"}[signs.pop()]
    return SignVerdict(verdict=verdict, lambdas=lams, y_estimate=yest.y_value,
                       null_band=band)
