"""Real-time what-if coronary hemodynamics from four reference solutions.

The package builds a patient-specific response surface out of four steady
network solutions (patient and idealized geometry, each under two microvascular
states), then answers interactive treatment questions about intermediate
geometries in milliseconds. A 1D nonlinear network solver serves as ground
truth for validation.
"""

from .generator import GeneratorConfig, SyntheticCase, case_stream, synthetic_case
from .harness import (
    ComparisonRecord,
    HarnessConfig,
    compute_stats,
    export_report,
    run_batch,
    run_validation_case,
)
from .ideal import IdealFitResult, brute_force_ideal, dilated_tree, fit_ideal
from .intervention import (
    Lesion,
    ModificationPlan,
    PlanError,
    StentInterval,
    apply_modification,
    default_plan,
    detect_lesions,
    select_evaluation_points,
)
from .oracle import (
    AnchorSet,
    BoundaryConditionSet,
    HemodynamicSolution,
    run_anchors,
    solve_steady,
)
from .solver import PsromResult, SolverConfig, ffr_trace, solve
from .stats import StatsSummary, summarize
from .surface import (
    EnvelopeError,
    GeometryCoefficients,
    ResponseSurface,
    SurfaceBuildError,
    build_surface,
)
from .tree import CenterlineTree, TreeValidationError

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "BoundaryConditionSet",
    "CenterlineTree",
    "ComparisonRecord",
    "EnvelopeError",
    "GeneratorConfig",
    "GeometryCoefficients",
    "HarnessConfig",
    "HemodynamicSolution",
    "IdealFitResult",
    "Lesion",
    "ModificationPlan",
    "PlanError",
    "PsromResult",
    "ResponseSurface",
    "SolverConfig",
    "StatsSummary",
    "StentInterval",
    "SurfaceBuildError",
    "SyntheticCase",
    "TreeValidationError",
    "apply_modification",
    "brute_force_ideal",
    "build_surface",
    "case_stream",
    "compute_stats",
    "default_plan",
    "detect_lesions",
    "dilated_tree",
    "export_report",
    "ffr_trace",
    "fit_ideal",
    "run_anchors",
    "run_batch",
    "run_validation_case",
    "select_evaluation_points",
    "solve",
    "solve_steady",
    "summarize",
    "synthetic_case",
    "__version__",
]
