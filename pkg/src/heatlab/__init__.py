"""heatlab: heat-kernel evaluation and gradient-bound verification on model manifolds."""

__version__ = "0.1.0"

from .manifolds import (
    Circle,
    CurvatureSummary,
    Euclidean,
    FlatTorus,
    Hyperbolic3,
    Manifold,
    Product,
    ProfileCurve,
    RevolutionSurface,
    Sphere2,
    ball_volume,
    curvature_summary,
    diameter_estimate,
    distance,
    format_manifold,
    parse_manifold,
    total_volume,
)

__all__ = [
    "__version__",
    "Circle", "CurvatureSummary", "Euclidean", "FlatTorus", "Hyperbolic3",
    "Manifold", "Product", "ProfileCurve", "RevolutionSurface", "Sphere2",
    "ball_volume", "curvature_summary", "diameter_estimate", "distance",
    "format_manifold", "parse_manifold", "total_volume",
    "KernelEvaluation", "LogDerivatives", "kernel_value",
    "kernel_log_derivatives", "fd_log_derivatives", "poisson_dual_check",
    "kernel_sup",
    "LiYauEvaluation", "MixtureSolution", "li_yau_quantity",
    "bochner_residual", "mixture_log_derivatives",
    "AlphaFamily", "BoundConstants", "minimal_constant_fit",
    "GridSpec", "run_check", "sweep_sup_tY", "h3_counterexample_scan",
    "product_additivity_check", "transfer_check", "fit_sharp_constants",
    "SpectralModel", "build_spectral_model", "validate_against_flat_torus",
]

from .bounds import AlphaFamily, BoundConstants, minimal_constant_fit
from .calculus import (
    LiYauEvaluation,
    MixtureSolution,
    bochner_residual,
    li_yau_quantity,
    mixture_log_derivatives,
)
from .grids import GridSpec
from .harness import (
    fit_sharp_constants,
    h3_counterexample_scan,
    product_additivity_check,
    run_check,
    sweep_sup_tY,
    transfer_check,
)
from .kernels import (
    KernelEvaluation,
    LogDerivatives,
    fd_log_derivatives,
    kernel_log_derivatives,
    kernel_sup,
    kernel_value,
    poisson_dual_check,
)
from .spectral import SpectralModel, build_spectral_model, validate_against_flat_torus
