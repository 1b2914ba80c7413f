"""Dual forward-backward splitting with primal recovery and a closed-form prox catalog."""

from . import prox
from .errors import *  # noqa: F401,F403
from .solver import (
    DualFBConfig,
    ProblemInstance,
    SolveResult,
    TraceRow,
    dual_objective,
    duality_gap,
    primal_objective,
    recover_primal,
    solve_dual_fb,
    solve_dual_fb_with_operator_errors,
    solve_dykstra_mode,
)
from .spaces import (
    LinOp,
    adjoint_consistency_check,
    discrete_divergence,
    discrete_gradient,
    estimate_opnorm,
    from_matrix,
    gradient_operator,
    identity,
)

__version__ = "0.1.0"
