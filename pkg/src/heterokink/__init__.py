"""Heteroclinic antikink solutions of driven Cahn-Hilliard stationary ODEs.

Numerics (shooting on the half line, fourth-order collocation BVPs,
branch tracing in the (A, delta) plane) together with the closed-form
asymptotic laws they are validated against.
"""

from ._version import __version__
from .analysis import (
    BranchRow,
    BranchTable,
    FitResult,
    Report,
    compare_report,
    fit_cube_root_A,
    fit_linear_A,
    fit_log_width,
    root_distances,
)
from .asymptotics import (
    AsymptoticPrediction,
    cch_A_pred,
    cch_width_pred,
    hcch_A_pred,
    hcch_width_pred,
    kink_profile,
    lambert_w,
    predict,
    tanh_profile,
)
from .bvp import (
    BvpConfig,
    BvpProblem,
    BvpSolution,
    Formulation,
    build_full_problem,
    build_half_problem,
    continue_in_delta,
    default_L,
    initial_guess,
    reflect,
    solve,
)
from .errors import (
    BranchLost,
    ConfigError,
    ContinuationStalled,
    DomainError,
    FewerThanTwoCrossings,
    FileFormatError,
    HeterokinkError,
    InsufficientRows,
    MeshBudget,
    MismatchedFamilies,
    NewtonDiverged,
    NonpositiveWidth,
    NotEnoughCrossings,
    NumericalFailure,
)
from .integrate import (
    EventKind,
    EventSpec,
    IntegratorConfig,
    Termination,
    Trajectory,
    integrate,
)
from .shoot import (
    BranchPoint,
    DistanceProfile,
    ShootConfig,
    branch_point_at,
    distance_function,
    distance_profile,
    scan_and_refine,
    signed_detector,
    trace_branch,
    unstable_seed,
)
from .systems import (
    EquilibriumInfo,
    ModelKind,
    ModelParams,
    char_poly_coeffs,
    dimension,
    equilibria,
    equilibrium_analysis,
    jacobian,
    profile_residual,
    reverse,
    rhs,
)

__all__ = [
    "__version__",
    "ModelKind",
    "ModelParams",
    "dimension",
    "equilibria",
    "rhs",
    "jacobian",
    "reverse",
    "char_poly_coeffs",
    "equilibrium_analysis",
    "EquilibriumInfo",
    "profile_residual",
    "AsymptoticPrediction",
    "predict",
    "cch_A_pred",
    "cch_width_pred",
    "hcch_A_pred",
    "hcch_width_pred",
    "lambert_w",
    "tanh_profile",
    "kink_profile",
    "IntegratorConfig",
    "EventKind",
    "EventSpec",
    "Termination",
    "Trajectory",
    "integrate",
    "ShootConfig",
    "DistanceProfile",
    "BranchPoint",
    "unstable_seed",
    "distance_function",
    "signed_detector",
    "distance_profile",
    "scan_and_refine",
    "branch_point_at",
    "trace_branch",
    "Formulation",
    "BvpConfig",
    "BvpProblem",
    "BvpSolution",
    "default_L",
    "initial_guess",
    "build_half_problem",
    "build_full_problem",
    "solve",
    "reflect",
    "continue_in_delta",
    "BranchRow",
    "BranchTable",
    "FitResult",
    "Report",
    "root_distances",
    "fit_linear_A",
    "fit_log_width",
    "fit_cube_root_A",
    "compare_report",
    "HeterokinkError",
    "DomainError",
    "NonpositiveWidth",
    "ConfigError",
    "FileFormatError",
    "InsufficientRows",
    "MismatchedFamilies",
    "FewerThanTwoCrossings",
    "NumericalFailure",
    "NotEnoughCrossings",
    "BranchLost",
    "NewtonDiverged",
    "MeshBudget",
    "ContinuationStalled",
]
