"""Gradient flow (fixed-step RK4) and gradient descent with per-step metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .errors import ContractionError, IntegrationError, SingularityError, SolveError
from .model import EPS_SING, Activation, Parameter, TargetModel
from .risk import LinearObjective

GradFn = Callable[[np.ndarray], "tuple[float, np.ndarray]"]

_GUARDS = {SingularityError: "singular", ContractionError: "contraction", SolveError: "solver"}


@dataclass
class Trajectory:
    """Parameters and metrics at each recorded time.

    ``w`` is the squared distance to the trivial solution ``(0, 1)``, ``r`` the
    squared distance to ``(xi, 0)``, ``phi = theta1 / (1 - theta2)`` (linear
    model only, else ``None``).
    """

    times: np.ndarray
    thetas: np.ndarray
    risk: np.ndarray
    w: np.ndarray
    r: np.ndarray
    grad_norm_sq: np.ndarray
    phi: np.ndarray | None = None
    status: str = "ok"
    message: str = ""

    def __len__(self):
        return len(self.times)

    @property
    def params(self) -> list[Parameter]:
        return [Parameter.from_vector(v) for v in self.thetas]

    @property
    def final(self) -> Parameter:
        return Parameter.from_vector(self.thetas[-1])

    def metric(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name))


class _Recorder:
    def __init__(self, target: TargetModel):
        self.xi = target.xi
        self.linear = target.activation is Activation.LINEAR
        self.rows = []

    def add(self, t, theta, risk, grad):
        t1, t2 = theta[:-1], theta[-1]
        w = float(t1 @ t1 + (t2 - 1.0) ** 2)
        dx = t1 - self.xi
        r = float(dx @ dx + t2 * t2)
        phi = t1 / (1.0 - t2) if self.linear and t2 != 1.0 else None
        self.rows.append((t, theta.copy(), risk, w, r, float(grad @ grad), phi))

    def build(self, status="ok", message="") -> Trajectory:
        cols = list(zip(*self.rows)) if self.rows else [()] * 7
        phi = np.array(cols[6]) if self.linear and self.rows else None
        return Trajectory(
            times=np.array(cols[0], dtype=float),
            thetas=np.array(cols[1], dtype=float),
            risk=np.array(cols[2], dtype=float),
            w=np.array(cols[3], dtype=float),
            r=np.array(cols[4], dtype=float),
            grad_norm_sq=np.array(cols[5], dtype=float),
            phi=phi,
            status=status,
            message=message,
        )


def _evaluate(gradfn, theta, linear, guard):
    if linear and abs(1.0 - theta[-1]) < guard:
        raise SingularityError(f"|1 - theta2| = {abs(1.0 - theta[-1]):.3e} below guard {guard:g}")
    risk, g = gradfn(theta)
    g = np.asarray(g, dtype=float)
    if not (np.isfinite(risk) and np.all(np.isfinite(g))):
        raise IntegrationError(f"non-finite risk or gradient at theta = {theta}")
    return float(risk), g


def _guard_status(exc):
    for cls, name in _GUARDS.items():
        if isinstance(exc, cls):
            return name
    raise exc


@dataclass(frozen=True)
class FlowConfig:
    step: float = 1e-3
    horizon: float = 10.0
    singularity_guard: float = EPS_SING
    record_every: int = 1
    grad_tol: float | None = None  # stop once |grad R| < grad_tol
    method: str = field(default="rk4", init=False)

    def __post_init__(self):
        if not (self.step > 0 and self.horizon > 0):
            raise ValueError("step and horizon must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(frozen=True)
class GdConfig:
    eta: float
    epochs: int
    singularity_guard: float = EPS_SING

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")


def _as_vector(theta0):
    if isinstance(theta0, Parameter):
        return theta0.as_vector()
    return np.array(theta0, dtype=float).reshape(-1)


def _linear_metrics(S, xi, thetas):
    """Risk and gradient of the linear population objective at many points at once."""
    a = 1.0 - thetas[:, -1]
    phi = thetas[:, :-1] / a[:, None]
    v = phi - xi
    Sv = v @ S
    risk = np.maximum(np.einsum("ij,ij->i", v, Sv), 0.0)
    grad = np.column_stack([2.0 * Sv / a[:, None], 2.0 * np.einsum("ij,ij->i", phi, Sv) / a])
    return risk, grad


def _linear_flow(obj, theta, config, target):
    h = config.step
    n_steps = int(round(config.horizon / h))
    S = obj.moments.sigma_matrix
    steps, rows, status = kernels.backend.linear_rk4(
        S, target.xi, theta, h, n_steps, config.record_every, config.grad_tol or 0.0,
        config.singularity_guard)
    status_name, message = ("singular", f"|1 - theta2| fell below guard {config.singularity_guard:g}") \
        if status else ("ok", "")
    if not len(steps):
        return _Recorder(target).build(status_name, message)
    risk, grad = _linear_metrics(S, target.xi, rows)
    if not (np.all(np.isfinite(risk)) and np.all(np.isfinite(grad))):
        raise IntegrationError("non-finite risk or gradient along the linear flow")
    t1, t2 = rows[:, :-1], rows[:, -1]
    dx = t1 - target.xi
    return Trajectory(
        times=steps * h,
        thetas=rows,
        risk=risk,
        w=np.einsum("ij,ij->i", t1, t1) + (t2 - 1.0) ** 2,
        r=np.einsum("ij,ij->i", dx, dx) + t2 * t2,
        grad_norm_sq=np.einsum("ij,ij->i", grad, grad),
        phi=t1 / (1.0 - t2)[:, None],
        status=status_name,
        message=message,
    )


def flow_integrate(gradfn: GradFn, theta0, config: FlowConfig, target: TargetModel) -> Trajectory:
    """Classical RK4 on ``theta' = -grad R(theta)`` with compensated state updates.

    The linear population objective runs in the compiled kernel. A singularity
    or contraction guard trip ends the run early and is reported in
    ``Trajectory.status``; non-finite values raise ``IntegrationError``.
    """
    theta = _as_vector(theta0)
    if isinstance(gradfn, LinearObjective):
        return _linear_flow(gradfn, theta, config, target)
    comp = np.zeros_like(theta)
    linear = target.activation is Activation.LINEAR
    guard = config.singularity_guard
    h = config.step
    n_steps = int(round(config.horizon / h))
    rec = _Recorder(target)
    for k in range(n_steps + 1):
        t = k * h
        try:
            risk, k1 = _evaluate(gradfn, theta, linear, guard)
        except (SingularityError, ContractionError, SolveError) as exc:
            return rec.build(_guard_status(exc), str(exc))
        done = k == n_steps or (config.grad_tol is not None and k1 @ k1 < config.grad_tol**2)
        if k % config.record_every == 0 or done:
            rec.add(t, theta, risk, k1)
        if done:
            break
        try:
            k2 = _evaluate(gradfn, theta - 0.5 * h * k1, linear, guard)[1]
            k3 = _evaluate(gradfn, theta - 0.5 * h * k2, linear, guard)[1]
            k4 = _evaluate(gradfn, theta - h * k3, linear, guard)[1]
        except (SingularityError, ContractionError, SolveError) as exc:
            return rec.build(_guard_status(exc), str(exc))
        # Kahan-compensated update keeps roundoff from swamping the RK4 error
        inc = -(h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4) - comp
        nxt = theta + inc
        comp = (nxt - theta) - inc
        theta = nxt
    return rec.build()


def gd_run(gradfn: GradFn, theta0, config: GdConfig, target: TargetModel) -> Trajectory:
    """``theta(t+1) = theta(t) - eta * grad R(theta(t))`` for ``config.epochs`` steps."""
    theta = _as_vector(theta0)
    linear = target.activation is Activation.LINEAR
    rec = _Recorder(target)
    for k in range(config.epochs + 1):
        try:
            risk, g = _evaluate(gradfn, theta, linear, config.singularity_guard)
        except (SingularityError, ContractionError, SolveError) as exc:
            return rec.build(_guard_status(exc), str(exc))
        rec.add(float(k), theta, risk, g)
        if k < config.epochs:
            theta = theta - config.eta * g
    return rec.build()


def estimate_rate(trajectory, metric: str = "risk", window: slice | None = None) -> float:
    """Decay exponent from a least-squares fit of ``ln m(t) = ln m(t0) - rate * (t - t0)``."""
    if isinstance(trajectory, Trajectory):
        t = trajectory.times
        m = trajectory.metric(metric)
    else:
        t, m = (np.asarray(a, dtype=float) for a in trajectory)
    if window is not None:
        t, m = t[window], m[window]
    if np.any(m <= 0):
        raise ValueError(f"metric {metric!r} must be strictly positive over the fitted window")
    if t.size < 2:
        raise ValueError("need at least two points to fit a rate")
    dt = t - t[0]
    dl = np.log(m) - np.log(m[0])
    return float(-(dt @ dl) / (dt @ dt))


class Monotone(NamedTuple):
    ok: bool
    first_violation: int | None


def check_monotone(values, metric: str | None = None, direction: str = "nonincreasing",
                   slack: float = 1e-12) -> Monotone:
    """Whether a sequence (or a trajectory metric) is monotone up to ``slack``.

    ``first_violation`` is the index ``i`` of the first offending step ``i-1 -> i``.
    """
    if isinstance(values, Trajectory):
        values = values.metric(metric or "risk")
    v = np.asarray(values, dtype=float)
    diff = np.diff(v)
    if direction == "nonincreasing":
        bad = np.flatnonzero(diff > slack)
    elif direction == "nondecreasing":
        bad = np.flatnonzero(diff < -slack)
    else:
        raise ValueError("direction must be 'nonincreasing' or 'nondecreasing'")
    if bad.size:
        return Monotone(False, int(bad[0]) + 1)
    return Monotone(True, None)
