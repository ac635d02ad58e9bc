"""OLS and PPML with high-dimensional fixed effects and clustered errors."""

from .absorb import Absorbed, absorb_fixed_effects, demean, singleton_mask
from .design import SPLINE1_KM, SPLINE2_KM, Design, DesignRow, build_design, group_codes, term_values
from .effects import Effect, effect_per_10pct, effect_per_unit, elasticity_effects, is_log_term
from .ols import CollinearityWarning, fit_ols
from .ppml import deviance, fit_ppml, relu_separation
from .spec import (
    AllRowsDroppedError,
    EstimateResult,
    EstimationConvergenceError,
    EstimationSpec,
    SpecError,
)
from .vcov import SingleClusterError, cluster_vcov, small_sample_factor


def estimate(panel, spec: EstimationSpec) -> EstimateResult:
    """Build the design from ``panel`` and fit it with ``spec.estimator``."""
    design = build_design(panel, spec)
    if spec.estimator == "ppml":
        return fit_ppml(design, spec)
    return fit_ols(design, spec)


__all__ = [
    "Absorbed",
    "AllRowsDroppedError",
    "CollinearityWarning",
    "Design",
    "DesignRow",
    "Effect",
    "EstimateResult",
    "EstimationConvergenceError",
    "EstimationSpec",
    "SPLINE1_KM",
    "SPLINE2_KM",
    "SingleClusterError",
    "SpecError",
    "absorb_fixed_effects",
    "build_design",
    "cluster_vcov",
    "demean",
    "deviance",
    "effect_per_10pct",
    "effect_per_unit",
    "elasticity_effects",
    "estimate",
    "fit_ols",
    "fit_ppml",
    "group_codes",
    "is_log_term",
    "relu_separation",
    "singleton_mask",
    "small_sample_factor",
    "term_values",
]
