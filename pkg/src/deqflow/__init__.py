"""Gradient dynamics of deep equilibrium linear and single-index models.

Forward solves, implicit gradients, gradient flow and descent, the constants of
the convergence theorems, and checks of those theorems against simulation.
"""

from .dynamics import (
    FlowConfig,
    GdConfig,
    Trajectory,
    check_monotone,
    estimate_rate,
    flow_integrate,
    gd_run,
)
from .errors import (
    BracketError,
    ContractionError,
    DEQError,
    DimensionError,
    IntegrationError,
    NoConvergenceError,
    RankError,
    SingularityError,
    SolveError,
)
from .experiments import RunConfig, RunResult, reproduce_linear, reproduce_sigmoid, run
from .kernels import BACKEND_NAME
from .model import Activation, FixedPointResult, Parameter, TargetModel, eval_g
from .risk import (
    DataModel,
    EmpiricalObjective,
    LinearObjective,
    MomentSummary,
    empirical_risk,
    empirical_risk_grad,
    fd_grad,
    implicit_output_grad,
    linear_risk,
    linear_risk_grad,
    second_moment,
)
from .solvers import Method, SolverConfig, brent_solve, picard_solve, solve, solve_outputs
from .theory import (
    BallRegion,
    ParamRegion,
    TheoryConstants,
    constant_M,
    gamma_inf,
    gd_constants_linear,
    gd_constants_nonlinear,
    limit_point_linear,
    rho_estimate,
)
from .verification import run_suite

__version__ = "0.1.0"
