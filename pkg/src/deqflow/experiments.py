"""Training runs: the two reference experiments and custom flow/GD runs, with artifacts."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import artifacts
from .dynamics import FlowConfig, GdConfig, Trajectory, check_monotone, flow_integrate, gd_run
from .errors import DEQError
from .model import Activation, Parameter, TargetModel
from .risk import DataKind, DataModel, EmpiricalObjective, LinearObjective, second_moment
from .rng import init_stream
from .solvers import Method, SolverConfig, solve_outputs
from .theory import (
    ParamRegion,
    gd_constants_linear,
    gd_constants_nonlinear,
    limit_point_linear,
    limit_point_origin_norm,
)

EXPERIMENTS = ("linear-1d", "sigmoid-1d", "custom")
INITS = ("origin", "trivial", "target")


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run. Two runs with equal configs write identical files."""

    experiment: str = "custom"
    seed: int = 0
    dim: int = 1
    xi: tuple = (2.0,)
    activation: str = "linear"
    data: str = "uniform"
    n_samples: int = 1000
    mode: str = "gd"
    eta: float = 0.01
    epochs: int = 200
    step: float = 1e-2
    horizon: float = 10.0
    init: str = "origin"
    init_scale: float = 0.1
    solver: str = "picard"
    tol: float = 1e-12
    delta1: float = 0.1
    delta2: float | None = None
    grid_n: int = 9
    constants: bool = True

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(float(v) for v in np.reshape(self.xi, -1)))
        if len(self.xi) == 1 and self.dim > 1:
            object.__setattr__(self, "xi", self.xi * self.dim)
        if len(self.xi) != self.dim:
            raise ValueError(f"xi has {len(self.xi)} entries but dim = {self.dim}")
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.mode not in ("gd", "flow"):
            raise ValueError("mode must be 'gd' or 'flow'")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        Activation.parse(self.activation)
        DataKind(self.data)
        Method(self.solver)
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.mode == "gd":
            GdConfig(self.eta, self.epochs)
        else:
            FlowConfig(self.step, self.horizon)
        if not self.is_linear:
            self.region.check(self.activation_enum)

    @property
    def activation_enum(self) -> Activation:
        return Activation.parse(self.activation)

    @property
    def is_linear(self) -> bool:
        return self.activation_enum is Activation.LINEAR

    @property
    def region(self) -> ParamRegion:
        """Parameter region for the nonlinear constants; ``delta2`` defaults to ``1 / (2L)``, capped at 1."""
        L = self.activation_enum.lipschitz_bound
        d2 = self.delta2 if self.delta2 is not None else min(1.0, 0.5 / L)
        return ParamRegion(self.delta1, d2, float(np.linalg.norm(self.xi)))

    def to_dict(self):
        out = asdict(self)
        out["xi"] = list(self.xi)
        return out


def linear_config(seed=0, **kw) -> RunConfig:
    base = dict(experiment="linear-1d", seed=seed, activation="linear", eta=0.01, epochs=200)
    base.update(kw)
    return RunConfig(**base)


def sigmoid_config(seed=0, **kw) -> RunConfig:
    base = dict(experiment="sigmoid-1d", seed=seed, activation="sigmoid", eta=0.1, epochs=4000,
                solver="brent")
    base.update(kw)
    return RunConfig(**base)


@dataclass
class RunResult:
    config: RunConfig
    trajectory: Trajectory
    constants: dict
    assertions: list
    status: str
    files: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(a["pass"] for a in self.assertions)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def summary(self) -> dict:
        return {"config": self.config.to_dict(), "constants": self.constants,
                "assertions": self.assertions, "status": self.status}


def _assertion(name, value, bound, passed, **extra):
    out = {"name": name, "value": value, "bound": bound, "pass": bool(passed)}
    out.update(extra)
    return out


def initial_parameter(config: RunConfig) -> Parameter:
    """``N(center, init_scale^2 I)`` from the init stream; ``center`` is 0, ``(0, 1)`` or ``(xi, 0)``."""
    d = config.dim
    center = np.zeros(d + 1)
    if config.init == "trivial":
        center[-1] = 1.0
    elif config.init == "target":
        center[:d] = config.xi
    z = init_stream(config.seed).standard_normal(d + 1)
    return Parameter.from_vector(center + config.init_scale * z)


def training_data(config: RunConfig) -> np.ndarray:
    return DataModel(config.data, config.dim, seed=config.seed).sample(config.n_samples)


def build_objective(config: RunConfig, X: np.ndarray):
    act = config.activation_enum
    target = TargetModel(np.array(config.xi), act)
    if act is Activation.LINEAR:
        # The sample second moment makes the population formula equal the empirical risk.
        return target, LinearObjective(target, second_moment(DataModel.empirical(X)))
    solver = SolverConfig(tolerance=config.tol, method=config.solver)
    return target, EmpiricalObjective(target, act, X, solver)


def _constants(config, theta0, target, objective, X):
    out = {}
    if config.is_linear:
        m = objective.moments
        out["kappa"] = m.kappa
        out["lambda_min"] = m.lambda_min
        try:
            out["flow_limit_point"] = limit_point_linear(theta0, config.xi).as_vector().tolist()
            out["flow_limit_point_origin_norm"] = \
                limit_point_origin_norm(theta0, config.xi).as_vector().tolist()
        except DEQError as exc:
            out["flow_limit_point_error"] = str(exc)
        if config.constants:
            try:
                c = gd_constants_linear(theta0, target, m)
                out.update({"c0": c.c0, "beta_lemma": c.beta, "eta0": c.eta0, "lipschitz_estimate": c.lipschitz,
                            "gd_linear_factor": c.factor_per_step(min(config.eta, c.eta0))})
            except DEQError as exc:
                out["gd_constants_error"] = str(exc)
    elif config.constants:
        alpha = math.sqrt(config.dim) if config.data == "uniform" else float(np.max(np.linalg.norm(X, axis=1)))
        nc = gd_constants_nonlinear(config.region, target, config.activation_enum, X, alpha,
                                    grid_n=config.grid_n, solver=SolverConfig(tolerance=config.tol))
        out.update(nc.to_dict())
        out.update({"alpha": alpha, "delta1": config.region.delta1, "delta2": config.region.delta2})
    return out


def theory_constants(config: RunConfig) -> dict:
    """The constants a run with ``config`` would report, without training."""
    X = training_data(config)
    theta0 = initial_parameter(config)
    target, objective = build_objective(config, X)
    out = {"theta0": theta0.as_vector().tolist()}
    out.update(_constants(config, theta0, target, objective, X))
    return out


def _assertions(config, traj, constants):
    out = []
    if len(traj) == 0:
        return out
    if config.is_linear:
        final = float(traj.risk[-1])
        out.append(_assertion("final loss", final, 1e-3, final < 1e-3))
        mono = check_monotone(traj.w, direction="nondecreasing", slack=1e-12)
        out.append(_assertion("distance to (0,1) nondecreasing", mono.first_violation, None, mono.ok))
        if config.init == "trivial":
            grow = float(math.sqrt(traj.w[-1]) - math.sqrt(traj.w[0]))
            out.append(_assertion("distance to (0,1) increased", grow, 0.0, grow > 0.0))
        if traj.phi is not None:
            err = float(np.linalg.norm(traj.phi[-1] - np.array(config.xi)))
            out.append(_assertion("learned slope error", err, 0.05, err <= 0.05))
    else:
        dist = np.sqrt(traj.r)
        out.append(_assertion("final distance to (xi,0)", float(dist[-1]), 0.1, dist[-1] < 0.1))
        radius = config.region.init_radius
        inside = np.flatnonzero(dist <= radius)
        if inside.size == 0:
            out.append(_assertion("distance decreases once in ball", None, radius, False,
                                  note="trajectory never entered the ball"))
        else:
            k = int(inside[0])
            mono = check_monotone(dist[k:], direction="nonincreasing", slack=1e-8)
            out.append(_assertion("distance decreases once in ball",
                                  None if mono.ok else k + mono.first_violation, radius, mono.ok,
                                  entered_at=k))
    return out


def run(config: RunConfig, outdir=None) -> RunResult:
    """Train per ``config``; when ``outdir`` is given write CSV, SVG and JSON artifacts there."""
    X = training_data(config)
    theta0 = initial_parameter(config)
    target, objective = build_objective(config, X)
    if config.mode == "gd":
        traj = gd_run(objective, theta0, GdConfig(config.eta, config.epochs), target)
    else:
        traj = flow_integrate(objective, theta0, FlowConfig(config.step, config.horizon), target)
    constants = _constants(config, theta0, target, objective, X)
    result = RunResult(config, traj, constants, _assertions(config, traj, constants),
                       "ok" if traj.status == "ok" else f"guard:{traj.status}")
    if traj.status != "ok":
        result.constants["guard_message"] = traj.message
    if outdir is not None:
        result.files = write_artifacts(result, Path(outdir), target, X)
    return result


def write_artifacts(result: RunResult, outdir: Path, target: TargetModel, X) -> list:
    outdir.mkdir(parents=True, exist_ok=True)
    cfg, traj = result.config, result.trajectory
    xlabel = "epoch" if cfg.mode == "gd" else "t"
    files = []

    def plot(stem, *args, **kw):
        artifacts.write_plot(outdir / stem, *args, **kw)
        files.extend([f"{stem}.svg", f"{stem}.csv"])

    artifacts.write_trajectory_csv(outdir / "trajectory.csv", traj)
    files.append("trajectory.csv")
    plot("loss", [("risk", traj.times, traj.risk)], title="Loss", xlabel=xlabel, ylabel="risk", logy=True)

    if cfg.dim == 1 and len(traj):
        series = [("trajectory", traj.thetas[:, 0], traj.thetas[:, 1])]
        marks = [("start", traj.thetas[0, 0], traj.thetas[0, 1]), ("end", traj.thetas[-1, 0], traj.thetas[-1, 1])]
        if cfg.is_linear:
            lo = min(float(traj.thetas[:, 1].min()), 0.0) - 0.25
            hi = max(float(traj.thetas[:, 1].max()), 1.0) + 0.25
            t2 = np.linspace(lo, hi, 101)
            series.append(("solutions (a xi, 1-a)", cfg.xi[0] * (1.0 - t2), t2))
            marks.append(("(0,1)", 0.0, 1.0))
        else:
            marks.append(("(xi,0)", cfg.xi[0], 0.0))
        plot("trajectory-plane", series, markers=marks, title="Parameter trajectory",
             xlabel="theta1", ylabel="theta2")

    if cfg.is_linear:
        plot("distance-to-(0,1)", [("|theta - (0,1)|", traj.times, np.sqrt(traj.w))],
             title="Distance from the trivial solution", xlabel=xlabel, ylabel="distance")
    else:
        plot("distance-to-target", [("|theta - (xi,0)|", traj.times, np.sqrt(traj.r))],
             title="Distance from the target parameter", xlabel=xlabel, ylabel="distance", logy=True)

    if cfg.dim == 1 and len(traj):
        xs = np.linspace(float(np.min(X)), float(np.max(X)), 101)
        grid = xs.reshape(-1, 1)
        learned = solve_outputs(traj.final, cfg.activation_enum, grid,
                                SolverConfig(tolerance=cfg.tol, method=cfg.solver))
        plot("learned-function", [("target", xs, target(grid)), ("learned", xs, learned)],
             title="Learned function", xlabel="x", ylabel="y")

    artifacts.write_json(outdir / "summary.json", result.summary())
    files.append("summary.json")
    return files


def reproduce_linear(seed: int = 0, outdir=None, **overrides) -> RunResult:
    """Linear DEQ, ``xi = 2``, 1000 Unif[0,1] samples, ``eta = 0.01``, 200 epochs from ``N(0, 0.1^2 I)``.

    ``init="trivial"`` starts from ``N((0, 1), 0.1^2 I)`` instead.
    """
    return run(linear_config(seed, **overrides), outdir)


def reproduce_sigmoid(seed: int = 0, outdir=None, **overrides) -> RunResult:
    """Sigmoid DEQ, ``f(x) = sigmoid(2x)``, Brent forward pass, ``eta = 0.1``, 4000 epochs."""
    return run(sigmoid_config(seed, **overrides), outdir)


def with_overrides(config: RunConfig, **kw) -> RunConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
