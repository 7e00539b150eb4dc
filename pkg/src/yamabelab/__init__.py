"""Numerical laboratory for conformal set invariants on model manifolds.

Computes the weighted first eigenvalue and the Yamabe invariant of measurable
regions of asymptotically Euclidean and flat-torus model manifolds, solves or
refutes the prescribed non-positive scalar curvature problem by subcritical
continuation, and realizes the Kelvin-transform compactification with
numerical regularity checks.
"""

__version__ = "0.1.0"

from .grid import (Grid, NormSpec, Region, build_grid, build_periodic_grid,
                   build_radial_grid, weight_rho, weighted_norm, weighted_volume)
from .metrics import (ConformalMetric, CurvatureTarget, catalog, conformal_transform,
                      make_metric, make_target, target_catalog)
from .operators import Constants, FormSet, apply_conformal_laplacian, assemble, constants, restrict
from .spectral import (DescentOptions, SignVerdict, SpectralResult, YamabeEstimate,
                       classify_sign, lambda_delta, yamabe_invariant)
from .prescribe import (PipelineOptions, SolveResult, SubcriticalState,
                        default_q_schedule, lower_scalar_curvature, prescribe_curvature,
                        subcritical_minimize, zero_scalar_outside)
from .compactify import (CompactChart, RegularityReport, decompactify, kelvin_compactify,
                         quotient_invariance_check, regularity_check)

__all__ = [name for name in dir() if not name.startswith("_")]
