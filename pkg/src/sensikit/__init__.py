"""Differentiable ODE solving and sensitivity-method cross-validation.

The package pairs an explicit Runge-Kutta core that is generic over its
scalar kind with every standard way of differentiating an ODE solution:
finite differences, complex step, forward AD via dual numbers, forward
sensitivity equations, a discrete adjoint over the solver's own step map,
and three continuous-adjoint realizations.
"""

from .core import (
    IntegratedLoss,
    LinearStateLoss,
    OdeProblem,
    SensitivityResult,
    Solution,
    SolverStats,
    SquaredErrorLoss,
    chain_gradient,
    loss_eval,
    loss_grad_u,
)
from .dual import DualScalar, MultiDual
from .solver import (
    JOINT_PRIMAL_DUAL,
    PRIMAL_ONLY,
    CheckpointStore,
    SolverConfig,
    StepController,
    checkpoint_plan,
    dense_eval,
    propose_dt,
    rk_step,
    scaled_error,
    solve,
)
from .tableaus import DOPRI5, EULER, RK4, ButcherTableau
from .direct import (
    complexstep_gradient,
    fd_gradient,
    fd_jvp,
    forwardad_gradient,
)
from .sensitivity import forward_sensitivity, jacobian_assembly, sensitivity_rhs
from .adjoint import (
    AdjointConfig,
    adjoint_rhs,
    continuous_adjoint,
    discrete_adjoint,
    gauss_legendre,
    step_vjp,
)
from .problems import CATALOG, make_harmonic, make_heat1d, make_predprey, make_problem

__version__ = "0.1.0"

__all__ = [
    "AdjointConfig",
    "ButcherTableau",
    "CATALOG",
    "CheckpointStore",
    "DOPRI5",
    "DualScalar",
    "EULER",
    "IntegratedLoss",
    "JOINT_PRIMAL_DUAL",
    "LinearStateLoss",
    "MultiDual",
    "OdeProblem",
    "PRIMAL_ONLY",
    "RK4",
    "SensitivityResult",
    "Solution",
    "SolverConfig",
    "SolverStats",
    "SquaredErrorLoss",
    "StepController",
    "adjoint_rhs",
    "chain_gradient",
    "checkpoint_plan",
    "complexstep_gradient",
    "continuous_adjoint",
    "dense_eval",
    "discrete_adjoint",
    "fd_gradient",
    "fd_jvp",
    "forward_sensitivity",
    "forwardad_gradient",
    "gauss_legendre",
    "jacobian_assembly",
    "loss_eval",
    "loss_grad_u",
    "make_harmonic",
    "make_heat1d",
    "make_predprey",
    "make_problem",
    "propose_dt",
    "rk_step",
    "scaled_error",
    "sensitivity_rhs",
    "solve",
    "step_vjp",
]
