"""Hot numeric kernels with a numba lane and a pure-numpy fallback.

The lane is selected once at import time from the environment variable
``YAMABELAB_KERNELS`` (``numba`` or ``numpy``).  Default is ``numba`` when the
package is importable, ``numpy`` otherwise.  Both lanes implement identical
contracts and agree to floating-point roundoff; ``benchmarks/bench_kernels.py``
compares their throughput.

Kernels operate on plain float64 arrays.  Periodic stencils consume a
precomputed neighbor-index table so the same code path serves any dimension.
The stencil kernels are the numba lane's win; the power kernels lose to
numpy's vectorized libm (float exponents), which the benchmark makes visible.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "ACTIVE_LANE",
    "HAS_NUMBA",
    "stiffness_apply_radial",
    "stiffness_apply_periodic",
    "abs_power_sum",
    "abs_power_grad",
    "lane_impls",
]

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False


def _select_lane() -> str:
    lane = os.environ.get("YAMABELAB_KERNELS", "").strip().lower()
    if lane in ("numba", "numpy"):
        if lane == "numba" and not HAS_NUMBA:
            return "numpy"
        return lane
    return "numba" if HAS_NUMBA else "numpy"


ACTIVE_LANE = _select_lane()


# ---------------------------------------------------------------------------
# numpy lane
# ---------------------------------------------------------------------------

def _stiffness_apply_radial_np(cell, u):
    out = np.zeros_like(u)
    flux = cell * (u[1:] - u[:-1])
    out[:-1] -= flux
    out[1:] += flux
    return out


def _stiffness_apply_periodic_np(u, neighbors, coeff):
    acc = neighbors.shape[1] * u - u[neighbors].sum(axis=1)
    return coeff * acc


def _abs_power_sum_np(u, w, q):
    return float(np.sum(w * np.abs(u) ** q))


def _abs_power_grad_np(u, w, q):
    return q * w * np.abs(u) ** (q - 1.0) * np.sign(u)


# ---------------------------------------------------------------------------
# numba lane
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _stiffness_apply_radial_nb(cell, u):
        m = u.shape[0]
        out = np.zeros(m)
        for k in range(m - 1):
            flux = cell[k] * (u[k + 1] - u[k])
            out[k] -= flux
            out[k + 1] += flux
        return out

    @njit(cache=True)
    def _stiffness_apply_periodic_nb(u, neighbors, coeff):
        m = u.shape[0]
        deg = neighbors.shape[1]
        out = np.empty(m)
        for i in range(m):
            acc = deg * u[i]
            for k in range(deg):
                acc -= u[neighbors[i, k]]
            out[i] = coeff * acc
        return out

    @njit(cache=True)
    def _abs_power_sum_nb(u, w, q):
        total = 0.0
        for i in range(u.shape[0]):
            total += w[i] * abs(u[i]) ** q
        return total

    @njit(cache=True)
    def _abs_power_grad_nb(u, w, q):
        m = u.shape[0]
        out = np.empty(m)
        for i in range(m):
            x = u[i]
            if x > 0.0:
                out[i] = q * w[i] * x ** (q - 1.0)
            elif x < 0.0:
                out[i] = -q * w[i] * (-x) ** (q - 1.0)
            else:
                out[i] = 0.0
        return out


_LANES = {
    "numpy": {
        "stiffness_apply_radial": _stiffness_apply_radial_np,
        "stiffness_apply_periodic": _stiffness_apply_periodic_np,
        "abs_power_sum": _abs_power_sum_np,
        "abs_power_grad": _abs_power_grad_np,
    }
}
if HAS_NUMBA:
    _LANES["numba"] = {
        "stiffness_apply_radial": _stiffness_apply_radial_nb,
        "stiffness_apply_periodic": _stiffness_apply_periodic_nb,
        "abs_power_sum": _abs_power_sum_nb,
        "abs_power_grad": _abs_power_grad_nb,
    }


def lane_impls(lane: str) -> dict:
    """Return the kernel table for an explicit lane (used by benchmarks/tests)."""
    if lane not in _LANES:
        raise KeyError(f"unknown kernel lane {lane!r}; have {sorted(_LANES)}")
    return _LANES[lane]


_ACTIVE = _LANES[ACTIVE_LANE]


def stiffness_apply_radial(cell: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Apply the 1-D chain stiffness: out_i = sum of cell fluxes c_k (u_k - u_{k+1})."""
    return _ACTIVE["stiffness_apply_radial"](cell, u)


def stiffness_apply_periodic(u: np.ndarray, neighbors: np.ndarray, coeff: float) -> np.ndarray:
    """Apply coeff * (deg*u_i - sum of neighbor values), the periodic graph stencil."""
    return _ACTIVE["stiffness_apply_periodic"](u, neighbors, coeff)


def abs_power_sum(u: np.ndarray, w: np.ndarray, q: float) -> float:
    """Weighted power sum  sum_i w_i |u_i|^q."""
    return _ACTIVE["abs_power_sum"](u, w, q)


def abs_power_grad(u: np.ndarray, w: np.ndarray, q: float) -> np.ndarray:
    """Gradient of abs_power_sum:  q w |u|^{q-1} sign(u)."""
    return _ACTIVE["abs_power_grad"](u, w, q)
