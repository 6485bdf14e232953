"""Population and empirical squared risk, their gradients, and a finite-difference oracle."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import DimensionError, SingularityError
from .model import EPS_SING, Activation, FixedPointResult, Parameter, TargetModel
from .rng import data_stream
from .solvers import SolverConfig, solve_outputs


class DataKind(enum.Enum):
    UNIFORM = "uniform"  # Unif[0, 1]^d
    GAUSSIAN = "gaussian"  # N(0, scale^2 I_d)
    EMPIRICAL = "empirical"  # a fixed list of vectors


@dataclass(frozen=True)
class DataModel:
    kind: DataKind
    dimension: int
    seed: int = 0
    scale: float = 1.0
    samples: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", DataKind(self.kind))
        if self.kind is DataKind.EMPIRICAL:
            X = np.atleast_2d(np.asarray(self.samples, dtype=float))
            if X.shape[1] != self.dimension:
                raise DimensionError("samples do not match the declared dimension")
            X.setflags(write=False)
            object.__setattr__(self, "samples", X)
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    @classmethod
    def empirical(cls, X) -> "DataModel":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls(DataKind.EMPIRICAL, X.shape[1], samples=X)

    def sample(self, n: int) -> np.ndarray:
        """``n`` draws from the data stream of ``seed``; empirical data returns its samples."""
        if self.kind is DataKind.EMPIRICAL:
            return np.array(self.samples)
        rng = data_stream(self.seed)
        if self.kind is DataKind.UNIFORM:
            return rng.random((n, self.dimension))
        return self.scale * rng.standard_normal((n, self.dimension))


@dataclass(frozen=True)
class MomentSummary:
    """Second moment ``Sigma = E[X X^T]`` with its extreme eigenvalues."""

    sigma_matrix: np.ndarray
    lambda_min: float
    lambda_max: float
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)
    analytic: bool = False
    standard_error: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def kappa(self) -> float:
        return self.lambda_max / self.lambda_min

    def truncated_second_moment(self, alpha: float) -> float:
        """``E[|X|^2 1{|X| <= alpha}]``."""
        d = self.sigma_matrix.shape[0]
        if self.analytic and d == 1 and self.samples is None:
            c = min(max(alpha, 0.0), 1.0)
            return c**3 / 3.0
        X = self.samples
        sq = np.einsum("ij,ij->i", X, X)
        return float(np.sum(np.where(sq <= alpha * alpha, sq, 0.0)) / X.shape[0])


def _summary(S, samples=None, analytic=False, se=None) -> MomentSummary:
    S = 0.5 * (S + S.T)
    ev = np.linalg.eigvalsh(S)
    return MomentSummary(S, float(ev[0]), float(ev[-1]), samples, analytic, se)


def second_moment(data: DataModel, n_mc: int = 100_000) -> MomentSummary:
    """Closed form for uniform data, sample average otherwise."""
    d = data.dimension
    if data.kind is DataKind.UNIFORM:
        S = np.full((d, d), 0.25) + np.eye(d) / 12.0
        samples = None if d == 1 else data.sample(n_mc)
        return _summary(S, samples, analytic=True)
    X = data.sample(n_mc)
    if X.shape[0] < 1:
        raise ValueError("need at least one sample")
    n = X.shape[0]
    S = X.T @ X / n
    outer = np.einsum("ni,nj->nij", X, X)
    se = outer.std(axis=0) / np.sqrt(n) if n > 1 else None
    return _summary(S, X, analytic=False, se=se)


def _phi(param: Parameter):
    a = 1.0 - param.theta2
    if abs(a) < EPS_SING:
        raise SingularityError(f"|1 - theta2| = {abs(a):.3e} below {EPS_SING:g}")
    return param.theta1 / a, a


def _check_dims(param, target, moments):
    d = param.dim
    if target.dim != d or moments.sigma_matrix.shape != (d, d):
        raise DimensionError("parameter, target and moments disagree on dimension")


def linear_risk(param: Parameter, target: TargetModel, moments: MomentSummary) -> float:
    """``(phi - xi)^T Sigma (phi - xi)`` with ``phi = theta1 / (1 - theta2)``."""
    _check_dims(param, target, moments)
    phi, _ = _phi(param)
    v = phi - target.xi
    return max(float(v @ moments.sigma_matrix @ v), 0.0)


def linear_risk_grad(param: Parameter, target: TargetModel, moments: MomentSummary) -> np.ndarray:
    """Gradient ``(2 Sigma (phi - xi) / a, 2 phi^T Sigma (phi - xi) / a)`` with ``a = 1 - theta2``."""
    _check_dims(param, target, moments)
    phi, a = _phi(param)
    Sv = moments.sigma_matrix @ (phi - target.xi)
    return np.append(2.0 * Sv / a, 2.0 * float(phi @ Sv) / a)


def implicit_output_grad(param: Parameter, activation: Activation, x,
                         fp: FixedPointResult) -> np.ndarray:
    """``grad_theta y = sigma'(w) / (1 - theta2 sigma'(w)) * (x, y)`` at the equilibrium."""
    activation = Activation.parse(activation)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != param.dim:
        raise DimensionError(f"x has dimension {x.size}, theta1 has {param.dim}")
    s = float(activation.derivative(fp.preactivation))
    den = 1.0 - param.theta2 * s
    if abs(den) < EPS_SING:
        raise SingularityError(f"IFT denominator {den:.3e} below {EPS_SING:g}")
    return (s / den) * np.append(x, fp.y)


def _risk_and_grad(param, target, activation, samples, solver, f=None):
    activation = Activation.parse(activation)
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    y = solve_outputs(param, activation, X, solver)
    if f is None:
        f = target(X)
    risk, grad, bad = kernels.backend.risk_grad_batch(activation.code, param.theta1,
                                                      param.theta2, X, f, y)
    if bad >= 0:
        raise SingularityError(f"sample {bad}: IFT denominator below {EPS_SING:g}")
    return float(risk), np.asarray(grad)


def empirical_risk(param, target, activation, samples, solver: SolverConfig = SolverConfig()) -> float:
    """Mean of ``(y_theta(x_i) - f(x_i))^2`` over a fixed sample set."""
    return _risk_and_grad(param, target, activation, samples, solver)[0]


def empirical_risk_grad(param, target, activation, samples,
                        solver: SolverConfig = SolverConfig()) -> np.ndarray:
    """Mean of ``2 (y_theta(x_i) - f(x_i)) grad_theta y_theta(x_i)``, summed in sample order."""
    return _risk_and_grad(param, target, activation, samples, solver)[1]


def empirical_risk_and_grad(param, target, activation, samples, solver: SolverConfig = SolverConfig()):
    return _risk_and_grad(param, target, activation, samples, solver)


def fd_grad(riskfn: Callable[[Parameter], float], param: Parameter, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of ``riskfn`` along each coordinate of ``(theta1, theta2)``."""
    if not h > 0:
        raise ValueError("h must be positive")
    v = param.as_vector()
    g = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        g[i] = (riskfn(Parameter.from_vector(v + e)) - riskfn(Parameter.from_vector(v - e))) / (2 * h)
    return g


class LinearObjective:
    """Population risk of the linear DEQ through ``Sigma``; maps a flat theta to ``(risk, grad)``."""

    def __init__(self, target: TargetModel, moments: MomentSummary):
        self.target = target
        self.moments = moments

    def __call__(self, theta):
        p = Parameter.from_vector(theta)
        return linear_risk(p, self.target, self.moments), linear_risk_grad(p, self.target, self.moments)


class EmpiricalObjective:
    """Sample-average risk of a single-index DEQ; maps a flat theta to ``(risk, grad)``."""

    def __init__(self, target: TargetModel, activation: Activation, samples,
                 solver: SolverConfig = SolverConfig()):
        self.target = target
        self.activation = Activation.parse(activation)
        self.samples = np.ascontiguousarray(np.atleast_2d(np.asarray(samples, dtype=float)))
        self.solver = solver
        self.f = target(self.samples)

    def __call__(self, theta):
        return _risk_and_grad(Parameter.from_vector(theta), self.target, self.activation,
                              self.samples, self.solver, self.f)
