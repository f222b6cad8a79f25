"""Transition paths and tipping statistics of piecewise-smooth systems.

Layers, lowest first: ``fields`` (one-sided vector fields and the two
parameterized families), ``mollifier`` (smoothing kernels and closed-form
mollified drifts), ``filippov`` (sliding vector fields, event-driven
integration, region taxonomy), ``action`` (discrete path functionals and
their exact gradients), ``mpath`` (most probable transition paths by
shooting, gradient flow, and closed form), ``mc`` (direct Monte Carlo
tipping statistics), ``cli`` (experiment presets and artifact output).
"""

from __future__ import annotations

__version__ = "0.1.0"

from .fields import (
    CallableDrift,
    Drift,
    FieldDimensionError,
    NonAutonomousParams1D,
    PiecewiseField,
    PiecewiseLinearParams2D,
)
from .mollifier import (
    KernelError,
    MollifierKernel,
    as_drift,
    lambda_inverse,
    lambda_profile,
    mollify,
)
from .filippov import (
    NullclineInfo,
    BasinLabel,
    DegenerateSlidingError,
    EquilibriumClass,
    EventResolutionError,
    HybridTrajectory,
    NotALimitCycleError,
    PeriodicSolution,
    RegionLabel,
    basin_membership,
    classify_sigma,
    cycle_data_2d,
    equilibrium_class_2d,
    filippov_lambda,
    fold_points_2d,
    h_minus_peak_time,
    integrate_filippov,
    nullclines_1d,
    pseudoequilibria_2d,
    sliding_flow,
    stable_cycles_1d,
)
from .action import (
    ActionBreakdown,
    DiscretePath,
    action_gradient,
    fw_action,
    gamma_action,
    gamma_action_1d,
    lambda_star,
    mollified_action,
    recovery_path,
)
from .mpath import (
    BranchUnavailableError,
    ELState,
    ELTrajectory,
    ExtendedPath,
    GradFlowResult,
    GradientFlowDivergenceError,
    HeteroclinicResult,
    InvalidExtensionError,
    PathNeverCrossesError,
    ShootingControls,
    ShootingConvergenceError,
    ShootingStage,
    SlidingMember,
    TheoremInapplicableError,
    analytic_mpp_case2,
    el_rhs,
    extend_with_tails,
    gradient_flow_minimize,
    hamiltonian,
    kramers_lower_bound,
    phi_branch,
    refine_gradient_flow,
    shoot_heteroclinic_case1,
    sliding_family_case1,
    xy_sup_distance,
)
from .mc import (
    BallTipping1D,
    BallTipping2D,
    CycleTipping1D,
    DoubleWellToy1D,
    EnsembleConfig,
    InsufficientDataError,
    TippingEnsemble,
    em_trajectory,
    mean_transition_path,
    run_ensemble,
    stream_normal,
    stream_uniform,
    tipping_detect_2d,
    tipping_time_1d,
)

__all__ = [
    "__version__",
    "ActionBreakdown",
    "BallTipping1D",
    "BallTipping2D",
    "BasinLabel",
    "BranchUnavailableError",
    "CallableDrift",
    "CycleTipping1D",
    "DegenerateSlidingError",
    "DiscretePath",
    "DoubleWellToy1D",
    "Drift",
    "ELState",
    "ELTrajectory",
    "EnsembleConfig",
    "EquilibriumClass",
    "EventResolutionError",
    "ExtendedPath",
    "FieldDimensionError",
    "GradFlowResult",
    "GradientFlowDivergenceError",
    "HeteroclinicResult",
    "HybridTrajectory",
    "InsufficientDataError",
    "InvalidExtensionError",
    "KernelError",
    "MollifierKernel",
    "NonAutonomousParams1D",
    "NotALimitCycleError",
    "NullclineInfo",
    "PathNeverCrossesError",
    "PeriodicSolution",
    "PiecewiseField",
    "PiecewiseLinearParams2D",
    "RegionLabel",
    "ShootingControls",
    "ShootingConvergenceError",
    "ShootingStage",
    "SlidingMember",
    "TheoremInapplicableError",
    "TippingEnsemble",
    "action_gradient",
    "analytic_mpp_case2",
    "as_drift",
    "basin_membership",
    "classify_sigma",
    "cycle_data_2d",
    "el_rhs",
    "em_trajectory",
    "equilibrium_class_2d",
    "extend_with_tails",
    "filippov_lambda",
    "fold_points_2d",
    "fw_action",
    "gamma_action",
    "gamma_action_1d",
    "gradient_flow_minimize",
    "h_minus_peak_time",
    "hamiltonian",
    "integrate_filippov",
    "kramers_lower_bound",
    "lambda_inverse",
    "lambda_profile",
    "lambda_star",
    "mean_transition_path",
    "mollified_action",
    "mollify",
    "nullclines_1d",
    "phi_branch",
    "pseudoequilibria_2d",
    "recovery_path",
    "refine_gradient_flow",
    "run_ensemble",
    "shoot_heteroclinic_case1",
    "sliding_family_case1",
    "sliding_flow",
    "stable_cycles_1d",
    "stream_normal",
    "stream_uniform",
    "tipping_detect_2d",
    "tipping_time_1d",
    "xy_sup_distance",
]
