"""Lewis-weight weighted-path-finding interior point toolkit.

Layers, bottom up:

- ``linalg``: normal-equation factor/solve, exact and sketched leverage
  scores, projection-matrix bundles.
- ``lewis``: lp Lewis weights (potential, residual, exact/approximate
  fixed-point solvers, homotopy initialization, Jacobian diagnostics).
- ``barrier1d``: the three 1-self-concordant interval barriers.
- ``pathfollow``: mixed norm, mixed-ball projection, chasing game,
  projected Newton steps, centering, path following, LP solve and dual
  extraction.
- ``lewisbarrier``: the Lewis weight barrier psi for {x : A x > b}.
- ``flow``: min-cost max-flow through the penalized LP reduction.
- ``cli``: the command-line surface.
"""

from . import errors
from .barrier1d import BarrierKind, BarrierStack, IntervalBarrier, barrier_eval, barriers_from_bounds
from .flow import FlowInstance, FlowSolution, build_flow_lp, perturb_costs, round_and_repair, solve_min_cost_flow, validate_flow
from .lewis import (
    LewisParams,
    compute_apx_weight,
    compute_exact_weight,
    compute_initial_weight,
    lewis_jacobian_apply,
    lewis_residual,
    lewis_sigma,
    volumetric_gradient,
    volumetric_potential,
)
from .lewisbarrier import BarrierEval, psi_gradient, psi_hessian, psi_value, self_concordance_probe
from .linalg import (
    NormalFactor,
    ProjectionBundle,
    factor_normal_equations,
    leverage_scores,
    projection_bundle,
    sketched_leverage_scores,
    solve_normal,
)
from .pathfollow import (
    ChasingConfig,
    LpProblem,
    PathConfig,
    PathState,
    SolveStats,
    StepReport,
    centering_inexact,
    chasing_step,
    dual_solve,
    lp_solve,
    mixed_norm,
    newton_step,
    path_following,
    project_mixed_ball,
    weight_function,
)

__all__ = [
    "errors",
    "BarrierKind",
    "BarrierStack",
    "IntervalBarrier",
    "barrier_eval",
    "barriers_from_bounds",
    "FlowInstance",
    "FlowSolution",
    "build_flow_lp",
    "perturb_costs",
    "round_and_repair",
    "solve_min_cost_flow",
    "validate_flow",
    "LewisParams",
    "compute_apx_weight",
    "compute_exact_weight",
    "compute_initial_weight",
    "lewis_jacobian_apply",
    "lewis_residual",
    "lewis_sigma",
    "volumetric_gradient",
    "volumetric_potential",
    "BarrierEval",
    "psi_gradient",
    "psi_hessian",
    "psi_value",
    "self_concordance_probe",
    "NormalFactor",
    "ProjectionBundle",
    "factor_normal_equations",
    "leverage_scores",
    "projection_bundle",
    "sketched_leverage_scores",
    "solve_normal",
    "ChasingConfig",
    "LpProblem",
    "PathConfig",
    "PathState",
    "SolveStats",
    "StepReport",
    "centering_inexact",
    "chasing_step",
    "dual_solve",
    "lp_solve",
    "mixed_norm",
    "newton_step",
    "path_following",
    "project_mixed_ball",
    "weight_function",
]

__version__ = "0.1.0"
