"""Forward pass: the equilibrium ``y_theta(x)`` by Picard iteration or Brent's method."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    BracketError,
    ContractionError,
    DimensionError,
    NoConvergenceError,
    SingularityError,
    SolveError,
)
from .model import (
    EPS_SING,
    Activation,
    FixedPointResult,
    Parameter,
    _dot,
    contraction_modulus,
    eval_g,
    scaled_norm,
)


class Method(enum.Enum):
    PICARD = "picard"
    BRENT = "brent"


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-12
    max_iterations: int = 100_000
    method: Method = Method.PICARD

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        object.__setattr__(self, "method", Method(self.method))


def _require_contraction(param, activation):
    q = contraction_modulus(param, activation)
    if not q < 1.0:
        raise ContractionError(f"contraction modulus L*|theta2| = {q:.6g} is not < 1")
    return q


def _result(param, activation, x, y, iterations):
    a = _dot(param, x)
    z = a + param.theta2 * y
    return FixedPointResult(
        y=float(y),
        preactivation=float(z),
        residual=abs(y - eval_g(param, activation, x, y)),
        iterations=int(iterations),
    )


def picard_solve(param: Parameter, activation: Activation, x, y0=None,
                 config: SolverConfig = SolverConfig(), history=None) -> FixedPointResult:
    """Banach iteration ``y <- g(x, y)``.

    ``y0`` defaults to ``sigma(theta1 . x)``, the exact answer when ``theta2 == 0``.
    If ``history`` is a list, the successive differences ``|y_{k+1} - y_k|`` are
    appended to it.
    """
    activation = Activation.parse(activation)
    _require_contraction(param, activation)
    a = _dot(param, x)
    y = float(activation.evaluate(a)) if y0 is None else float(y0)
    if history is None:
        be = kernels.backend
        y, k, status = be.picard(activation.code, a, param.theta2, y, config.tolerance,
                                 config.max_iterations)
    else:
        status, k = 1, config.max_iterations
        for it in range(1, config.max_iterations + 1):
            yn = float(activation.evaluate(a + param.theta2 * y))
            step = abs(yn - y)
            history.append(step)
            y = yn
            if step <= config.tolerance:
                status, k = 0, it
                break
    if status != 0:
        raise NoConvergenceError(f"Picard iteration did not converge in {config.max_iterations} steps")
    return _result(param, activation, x, y, k)


def bracket_from_bound(param: Parameter, activation: Activation, x) -> tuple[float, float]:
    """Symmetric bracket from the a priori bound ``|y| <= (|s(0)| + L|theta1||x|)/(1 - L|theta2|)``.

    The bound is inflated by 1% so the root sits strictly inside.
    """
    activation = Activation.parse(activation)
    q = _require_contraction(param, activation)
    x = np.asarray(x, dtype=float).reshape(-1)
    _dot(param, x)
    s0 = abs(float(activation.evaluate(0.0)))
    L = activation.lipschitz_bound
    b = 1.01 * (s0 + L * scaled_norm(param.theta1) * scaled_norm(x)) / (1.0 - q)
    return -b, b


def brent_solve(param: Parameter, activation: Activation, x,
                config: SolverConfig = SolverConfig(), bracket=None) -> FixedPointResult:
    """Root of ``h(y) = y - g(x, y)`` by Brent's inverse-quadratic/secant/bisection hybrid."""
    activation = Activation.parse(activation)
    lo, hi = bracket if bracket is not None else bracket_from_bound(param, activation, x)
    a = _dot(param, x)
    y, k, status = kernels.backend.brent(activation.code, a, param.theta2, float(lo), float(hi),
                                         config.tolerance, config.max_iterations)
    if status == 2:
        raise BracketError(f"h has the same sign at both ends of [{lo}, {hi}]")
    if status == 1:
        raise NoConvergenceError(f"Brent's method did not converge in {config.max_iterations} steps")
    return _result(param, activation, x, y, k)


def solve(param, activation, x, config: SolverConfig = SolverConfig()) -> FixedPointResult:
    if Method(config.method) is Method.BRENT:
        return brent_solve(param, activation, x, config)
    return picard_solve(param, activation, x, config=config)


def solve_outputs(param: Parameter, activation: Activation, X,
                  config: SolverConfig = SolverConfig()) -> np.ndarray:
    """Equilibria for every row of ``X`` via the active kernel backend.

    The linear activation is solved in closed form, which is exact and also
    covers the non-contractive regime ``|theta2| >= 1``.
    """
    activation = Activation.parse(activation)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != param.dim:
        raise DimensionError(f"inputs have dimension {X.shape[1]}, theta1 has {param.dim}")
    if activation is Activation.LINEAR:
        if abs(1.0 - param.theta2) < EPS_SING:
            raise SingularityError(f"|1 - theta2| below {EPS_SING:g}")
        return (X @ param.theta1) / (1.0 - param.theta2)
    _require_contraction(param, activation)
    method = kernels.BRENT if Method(config.method) is Method.BRENT else kernels.PICARD
    y, _, status = kernels.backend.solve_batch(activation.code, param.theta1, param.theta2, X,
                                               method, config.tolerance, config.max_iterations)
    bad = np.flatnonzero(status)
    if bad.size:
        i = int(bad[0])
        cause = (BracketError("no sign change") if status[i] == 2
                 else NoConvergenceError("iteration cap reached"))
        raise SolveError(i, cause)
    return y


def picard_iteration_bound(q: float, tol: float, first_step: float) -> int:
    """Geometric-convergence certificate on the Picard iteration count."""
    if first_step <= tol:
        return 1
    if q == 0.0:
        return 2
    return math.ceil(math.log(tol * (1.0 - q) / first_step) / math.log(q)) + 1
