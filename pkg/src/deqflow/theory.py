"""Constants and predictions from the convergence theorems, computed numerically.

Infima and suprema over the parameter region are taken over a finite grid and
expectations over a fixed-seed sample set, so ``rho`` and ``lambda2`` are
reproducible estimates rather than certified bounds. The grid resolution and
Monte-Carlo size are reported alongside every value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ContractionError, RankError, SingularityError
from .model import EPS_SING, Activation, Parameter, TargetModel
from .risk import DataModel, MomentSummary, linear_risk, linear_risk_grad
from .rng import stream
from .solvers import SolverConfig, solve_outputs

#: ``rho`` at or below this is treated as zero (nonlinearity assumption fails).
RHO_FLOOR = 1e-8


def limit_point_linear(theta0: Parameter, xi) -> Parameter:
    """Where linear-DEQ gradient flow started at ``theta0`` ends up.

    The flow stays on the sphere of radius ``sqrt(w0)`` about ``(0, 1)`` and on
    its side of ``theta2 = 1``, and stops on the solution line
    ``(a xi, 1 - a)``; intersecting the two gives
    ``a = sign(1 - theta2(0)) sqrt(w0) / sqrt(|xi|^2 + 1)``.
    """
    xi = np.asarray(xi, dtype=float).reshape(-1)
    gap = 1.0 - theta0.theta2
    if abs(gap) < EPS_SING:
        raise SingularityError("theta2(0) = 1: the flow is undefined")
    w0 = float(theta0.theta1 @ theta0.theta1 + gap * gap)
    a = math.copysign(math.sqrt(w0), gap) / math.sqrt(float(xi @ xi) + 1.0)
    return Parameter(a * xi, 1.0 - a)


def limit_point_origin_norm(theta0: Parameter, xi) -> Parameter:
    """Alternative closed form ``a = sign(theta2(0)) |theta(0)| / sqrt(|xi|^2 + 1)``.

    Kept only so runs can report which convention the integrated flow matches;
    it is not conserved by the flow and is generally wrong.
    """
    xi = np.asarray(xi, dtype=float).reshape(-1)
    sign = 1.0 if theta0.theta2 >= 0 else -1.0
    a = sign * float(np.linalg.norm(theta0.as_vector())) / math.sqrt(float(xi @ xi) + 1.0)
    return Parameter(a * xi, 1.0 - a)


def linear_flow_rate(lambda_min: float, beta: float) -> float:
    """Exponent ``4 lambda_min / beta^2`` of the exponential bound on ``|phi - xi|^2``."""
    return 4.0 * lambda_min / beta**2


def gamma_inf(activation: Activation, radius: float, n_grid: int = 100_001) -> float:
    """``inf { sigma'(z) : |z| <= radius }`` by a grid search refined around the minimizer."""
    activation = Activation.parse(activation)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0:
        return float(activation.derivative(0.0))
    z = np.linspace(-radius, radius, n_grid)
    v = activation.derivative(z)
    i = int(np.argmin(v))
    best = float(v[i])
    lo, hi = z[max(i - 1, 0)], z[min(i + 1, n_grid - 1)]
    if hi > lo:
        res = minimize_scalar(lambda s: float(activation.derivative(s)), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        best = min(best, float(res.fun))
    return best


def constant_M(activation: Activation, alpha: float, delta1: float, delta2: float,
               norm_xi: float) -> float:
    """Bound ``(|s(0)| + L a (1 + d1)|xi|) / (1 - L d2)`` on ``|y_theta(x)|`` over the region."""
    activation = Activation.parse(activation)
    L = activation.lipschitz_bound
    if not L * delta2 < 1:
        raise ContractionError(f"L * delta2 = {L * delta2:g} is not < 1")
    s0 = abs(float(activation.evaluate(0.0)))
    return (s0 + L * alpha * (1.0 + delta1) * norm_xi) / (1.0 - L * delta2)


@dataclass(frozen=True)
class ParamRegion:
    """``{ |theta1| <= (1 + delta1) |xi|, |theta2| <= delta2 }``."""

    delta1: float
    delta2: float
    norm_xi: float

    def __post_init__(self):
        if not (self.delta1 > 0 and self.delta2 > 0 and self.norm_xi > 0):
            raise ValueError("delta1, delta2 and norm_xi must be positive")

    @property
    def theta1_radius(self) -> float:
        return (1.0 + self.delta1) * self.norm_xi

    @property
    def init_radius(self) -> float:
        """Largest admissible ``|theta(0) - (xi, 0)|``."""
        return min(self.theta1_radius, self.delta2)

    def check(self, activation: Activation):
        L = Activation.parse(activation).lipschitz_bound
        if not L * self.delta2 < 1:
            raise ContractionError(f"L * delta2 = {L * self.delta2:g} is not < 1")

    def contains(self, param: Parameter, slack: float = 0.0) -> bool:
        return (float(np.linalg.norm(param.theta1)) <= self.theta1_radius + slack
                and abs(param.theta2) <= self.delta2 + slack)

    def grid(self, grid_n: int, dim: int) -> list[Parameter]:
        """``grid_n`` points per axis; cube points outside the ball are projected onto it."""
        if grid_n < 2:
            raise ValueError("grid_n must be >= 2")
        R = self.theta1_radius
        axis = np.linspace(-R, R, grid_n)
        t1s = set()
        for p in itertools.product(axis, repeat=dim):
            v = np.array(p)
            n = float(np.linalg.norm(v))
            if n > R:
                v = v * (R / n)
            t1s.add(tuple(np.round(v, 14)))
        t2s = np.linspace(-self.delta2, self.delta2, grid_n)
        return [Parameter(np.array(t1), t2) for t1 in sorted(t1s) for t2 in t2s]


@dataclass(frozen=True)
class BallRegion:
    """Ball of radius ``radius`` about ``(xi, 0)``, a sharper stand-in for ``ParamRegion``.

    Gradient flow never increases ``r = |theta - (xi, 0)|^2`` (once the rate
    bound holds), so a flow started at distance ``radius`` stays in this ball.
    ``delta1`` and ``delta2`` describe the smallest ``ParamRegion`` containing
    it, which is what ``M`` and ``gamma`` need.
    """

    xi: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(float(v) for v in np.reshape(self.xi, -1)))
        if not (self.radius > 0 and self.norm_xi > 0):
            raise ValueError("radius and |xi| must be positive")

    @property
    def norm_xi(self) -> float:
        return float(np.linalg.norm(self.xi))

    @property
    def delta1(self) -> float:
        return self.radius / self.norm_xi

    @property
    def delta2(self) -> float:
        return self.radius

    @property
    def theta1_radius(self) -> float:
        return self.norm_xi + self.radius

    def check(self, activation: Activation):
        ParamRegion(self.delta1, self.delta2, self.norm_xi).check(activation)

    def contains(self, param: Parameter, slack: float = 0.0) -> bool:
        v = param.as_vector() - np.append(self.xi, 0.0)
        return float(np.linalg.norm(v)) <= self.radius + slack

    def grid(self, grid_n: int, dim: int) -> list[Parameter]:
        """``grid_n`` points per axis of the bounding cube, outside points projected onto the ball."""
        if grid_n < 2:
            raise ValueError("grid_n must be >= 2")
        c = np.append(self.xi, 0.0)
        if c.size != dim + 1:
            raise ValueError("xi does not match the data dimension")
        axis = np.linspace(-self.radius, self.radius, grid_n)
        pts = set()
        for p in itertools.product(axis, repeat=dim + 1):
            v = np.array(p)
            n = float(np.linalg.norm(v))
            if n > self.radius:
                v = v * (self.radius / n)
            pts.add(tuple(np.round(c + v, 14)))
        return [Parameter.from_vector(np.array(p)) for p in sorted(pts)]


@dataclass(frozen=True)
class RhoEstimate:
    value: float
    argmin: Parameter = field(compare=False)
    grid_n: int
    n_points: int
    n_mc: int
    standard_error: float

    def to_dict(self):
        return {"value": self.value, "argmin": self.argmin.as_vector().tolist(), "grid_n": self.grid_n,
                "n_points": self.n_points, "n_mc": self.n_mc, "standard_error": self.standard_error}


def _samples(data, n_mc):
    if isinstance(data, DataModel):
        return data.sample(n_mc)
    return np.atleast_2d(np.asarray(data, dtype=float))


def _augmented(param, activation, X, solver):
    y = solve_outputs(param, activation, X, solver)
    return np.column_stack([X, y])


def _rho_scan(region, activation, X, alpha, grid_n, solver):
    activation = Activation.parse(activation)
    region.check(activation)
    n, d = X.shape
    inside = np.einsum("ij,ij->i", X, X) <= alpha * alpha
    best = (math.inf, None, 0.0)
    fourth_sup = 0.0
    pts = region.grid(grid_n, d)
    for p in pts:
        Z = _augmented(p, activation, X, solver)
        sq = np.einsum("ij,ij->i", Z, Z)
        fourth_sup = max(fourth_sup, float(np.mean(sq * sq)))
        Zt = Z[inside]
        M = Zt.T @ Zt / n
        ev, vec = np.linalg.eigh(M)
        if ev[0] < best[0]:
            q = np.zeros(n)
            q[inside] = (Zt @ vec[:, 0]) ** 2
            best = (float(ev[0]), p, float(q.std() / math.sqrt(n)))
    return best, fourth_sup, len(pts)


def rho_estimate(region: "ParamRegion | BallRegion", target: TargetModel, activation: Activation, data,
                 alpha: float, grid_n: int = 9, n_mc: int = 2000,
                 solver: SolverConfig = SolverConfig()) -> RhoEstimate:
    """Grid minimum of ``lambda_min E[(X, y)(X, y)^T 1{|X| <= alpha}]`` over the region.

    ``data`` is a ``DataModel`` (sampled with ``n_mc`` draws) or a sample array.
    """
    X = _samples(data, n_mc)
    (value, argmin, se), _, npts = _rho_scan(region, activation, X, alpha, grid_n, solver)
    return RhoEstimate(max(value, 0.0), argmin, grid_n, npts, X.shape[0], se)


@dataclass(frozen=True)
class NonlinearConstants:
    rho: float
    gamma: float
    M: float
    gamma_radius: float
    lambda1: float
    lambda2: float
    eta_max: float
    fourth_moment_sup: float
    truncated_moment: float
    applicable: bool
    rho_detail: RhoEstimate = field(compare=False)

    def flow_rate(self) -> float:
        """Exponent ``2 rho gamma^2 / (1 + L delta2)`` of the bound on ``r(t)``."""
        return self.lambda1

    def factor_per_step(self, eta: float) -> float:
        return 1.0 - eta * self.lambda1 / 2.0

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if k != "rho_detail"}
        out["rho_detail"] = self.rho_detail.to_dict()
        return out


def gd_constants_nonlinear(region: "ParamRegion | BallRegion", target: TargetModel, activation: Activation,
                           data, alpha: float, grid_n: int = 9, n_mc: int = 2000,
                           solver: SolverConfig = SolverConfig()) -> NonlinearConstants:
    """``rho, gamma, M`` and the step-size constants ``lambda1, lambda2, eta_max``."""
    activation = Activation.parse(activation)
    L = activation.lipschitz_bound
    X = _samples(data, n_mc)
    (rho, argmin, se), fourth_sup, npts = _rho_scan(region, activation, X, alpha, grid_n, solver)
    rho = max(rho, 0.0)
    M = constant_M(activation, alpha, region.delta1, region.delta2, region.norm_xi)
    radius = alpha * (1.0 + region.delta1) * region.norm_xi + M * region.delta2
    gamma = gamma_inf(activation, radius)
    applicable = activation is not Activation.LINEAR and rho > RHO_FLOOR and gamma > 0
    lam1 = 2.0 * rho * gamma**2 / (1.0 + L * region.delta2) if applicable else 0.0
    lam2 = 4.0 * L**2 * (L / (1.0 - L * region.delta2)) ** 2 * fourth_sup
    sq = np.einsum("ij,ij->i", X, X)
    trunc = float(np.sum(np.where(sq <= alpha * alpha, sq, 0.0)) / X.shape[0])
    return NonlinearConstants(
        rho=rho, gamma=gamma, M=M, gamma_radius=radius, lambda1=lam1, lambda2=lam2,
        eta_max=lam1 / (2.0 * lam2) if lam2 > 0 else 0.0,
        fourth_moment_sup=fourth_sup, truncated_moment=trunc, applicable=applicable,
        rho_detail=RhoEstimate(rho, argmin, grid_n, npts, X.shape[0], se),
    )


@dataclass(frozen=True)
class LinearGdConstants:
    c0: float
    beta: float
    eta0: float
    kappa: float
    alpha: float  # 2 sqrt(w0), upper bound on |1 - theta2| inside the invariant set
    lipschitz: float
    w0: float
    risk0: float

    def factor_per_step(self, eta: float) -> float:
        return 1.0 - eta / (self.kappa * self.alpha**2)

    def to_dict(self):
        return asdict(self)


def estimate_gradient_lipschitz(theta0: Parameter, target: TargetModel, moments: MomentSummary,
                                beta: float, n_pairs: int = 10_000, seed: int = 0,
                                inflate: float = 2.0) -> float:
    """Difference-quotient estimate of the gradient's Lipschitz constant, times ``inflate``.

    Pairs are drawn in the invariant set enlarged by ``beta / 2``:
    ``beta/2 <= |1 - theta2| <= 2 sqrt(w0) + beta/2`` (either side of 1) and
    ``|theta1| <= 2 sqrt(w0) + beta/2``. Half the pairs are nearby points, which
    probe the local curvature; the rest are independent.
    """
    d = theta0.dim
    w0 = float(theta0.theta1 @ theta0.theta1 + (1.0 - theta0.theta2) ** 2)
    outer = 2.0 * math.sqrt(w0) + beta / 2.0
    rng = stream(seed, 0)

    def draw(k):
        g = rng.standard_normal((k, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        t1 = g * (outer * rng.random((k, 1)) ** (1.0 / d))
        gap = rng.uniform(beta / 2.0, outer, k) * rng.choice([-1.0, 1.0], k)
        return np.column_stack([t1, 1.0 - gap])

    def grad(v):
        return linear_risk_grad(Parameter.from_vector(v), target, moments)

    n_local = n_pairs // 2
    A = draw(n_pairs)
    B = draw(n_pairs)
    step = 1e-4 * beta
    B[:n_local] = A[:n_local] + step * rng.standard_normal((n_local, d + 1))
    # keep local partners inside the enlarged set
    gapB = np.abs(1.0 - B[:, -1])
    ok = gapB >= beta / 2.0
    best = 0.0
    for a, b in zip(A[ok], B[ok]):
        dist = float(np.linalg.norm(a - b))
        if dist == 0.0:
            continue
        best = max(best, float(np.linalg.norm(grad(a) - grad(b))) / dist)
    return inflate * best


def gd_constants_linear(theta0: Parameter, target: TargetModel, moments: MomentSummary,
                        risk0: float | None = None, n_pairs: int = 10_000,
                        seed: int = 0) -> LinearGdConstants:
    """Invariant-set constants ``c0, beta``, a step bound ``eta0`` and the condition number."""
    if moments.lambda_min <= 1e-12 * max(moments.lambda_max, 1e-300):
        raise RankError("E[X X^T] is singular; the linear step-size bounds need it positive definite")
    gap = 1.0 - theta0.theta2
    if abs(gap) < EPS_SING:
        raise SingularityError("theta2(0) = 1")
    if risk0 is None:
        risk0 = linear_risk(theta0, target, moments)
    w0 = float(theta0.theta1 @ theta0.theta1 + gap * gap)
    c0 = math.sqrt(risk0 / moments.lambda_min)
    norm_xi = float(np.linalg.norm(target.xi))
    beta = min(abs(gap), math.sqrt(w0) / (math.sqrt(2.0) * (c0 + norm_xi + 1.0)))
    lip = estimate_gradient_lipschitz(theta0, target, moments, beta, n_pairs, seed)
    cands = [1.0 / lip, beta / 2.0]
    if risk0 > 0:
        cands.append(beta**2 / (4.0 * risk0))
    return LinearGdConstants(
        c0=c0, beta=beta, eta0=min(cands), kappa=moments.kappa, alpha=2.0 * math.sqrt(w0),
        lipschitz=lip, w0=w0, risk0=risk0,
    )


@dataclass
class TheoryConstants:
    """Flat bundle of every constant a run reports; fields not applicable stay ``None``."""

    kappa: float | None = None
    limit_point: list | None = None
    linear_flow_rate: float | None = None
    gd_linear_factor: float | None = None
    M: float | None = None
    gamma: float | None = None
    rho: float | None = None
    lambda1: float | None = None
    lambda2: float | None = None
    eta0: float | None = None
    c0: float | None = None
    beta_lemma: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if k != "extra"}
        out.update(self.extra)
        return out
