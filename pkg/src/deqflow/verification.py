"""Numerical checks of the theorems' claims, grouped into suites.

Each check returns a ``Check`` with the measured value, the bound it is held
to and a pass flag. Instance generators draw from ``named_stream(seed, name)``
so every suite is reproducible and independent of the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import FlowConfig, GdConfig, check_monotone, estimate_rate, flow_integrate, gd_run
from .model import Activation, Parameter, TargetModel
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
from .rng import named_stream
from .solvers import SolverConfig, solve, solve_outputs
from .theory import (
    RHO_FLOOR,
    BallRegion,
    ParamRegion,
    constant_M,
    gamma_inf,
    gd_constants_linear,
    gd_constants_nonlinear,
    limit_point_linear,
    limit_point_origin_norm,
    rho_estimate,
)

SUITES = ("gradcheck", "linear-flow", "linear-gd", "nonlinear-flow", "nonlinear-gd", "constants")

#: Drift at or below this many ulps of ``w`` is roundoff, not integration error.
DRIFT_FLOOR_ULPS = 32
_FD_SOLVER = SolverConfig(tolerance=1e-15)


@dataclass
class Check:
    name: str
    value: float | None
    bound: float | None
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"name": self.name, "value": self.value, "bound": self.bound, "pass": bool(self.passed)}
        if self.detail:
            out["detail"] = self.detail
        return out


def _rel_err(g, ref):
    return float(np.linalg.norm(g - ref) / max(float(np.linalg.norm(ref)), 1e-8))


_NONLINEAR = (Activation.SIGMOID, Activation.TANH, Activation.SOFTPLUS)


def _contractive_param(rng, act, d):
    t2 = rng.uniform(-0.8, 0.8) / act.lipschitz_bound
    return Parameter(rng.normal(size=d), t2)


# -- gradient checks ---------------------------------------------------------

def check_implicit_grad(seed=0, n_points=200, h=1e-5, tol=1e-5) -> Check:
    """IFT output gradient against central differences of the solved equilibrium."""
    rng = named_stream(seed, "gradcheck-output")
    worst = 0.0
    for i in range(n_points):
        act = _NONLINEAR[i % 3]
        d = 1 + i % 3
        p = _contractive_param(rng, act, d)
        x = rng.normal(size=d)
        g = implicit_output_grad(p, act, x, solve(p, act, x, _FD_SOLVER))
        ref = fd_grad(lambda q: solve(q, act, x, _FD_SOLVER).y, p, h)
        worst = max(worst, _rel_err(g, ref))
    return Check("implicit_output_grad vs finite differences", worst, tol, worst <= tol,
                 {"points": n_points, "h": h})


def _random_moments(rng, d):
    A = rng.normal(size=(d, d))
    S = A @ A.T / d + 0.1 * np.eye(d)
    ev = np.linalg.eigvalsh(S)
    return MomentSummary(S, float(ev[0]), float(ev[-1]))


def check_linear_risk_grad(seed=0, n_points=200, h=1e-6, tol=1e-6) -> Check:
    """Closed-form population gradient against central differences of the closed-form risk."""
    rng = named_stream(seed, "gradcheck-linear")
    worst = 0.0
    for i in range(n_points):
        d = 1 + i % 3
        m = _random_moments(rng, d)
        target = TargetModel(rng.normal(size=d))
        t2 = rng.uniform(-1.0, 3.0)
        while abs(1.0 - t2) < 0.2:
            t2 = rng.uniform(-1.0, 3.0)
        p = Parameter(rng.normal(size=d), t2)
        g = linear_risk_grad(p, target, m)
        ref = fd_grad(lambda q: linear_risk(q, target, m), p, h)
        worst = max(worst, _rel_err(g, ref))
    return Check("linear_risk_grad vs finite differences", worst, tol, worst <= tol,
                 {"points": n_points, "h": h})


def check_empirical_risk_grad(seed=0, n_points=200, n_samples=50, h=1e-5, tol=1e-5) -> Check:
    """Sample-average IFT gradient against central differences of the solved risk."""
    rng = named_stream(seed, "gradcheck-empirical")
    worst = 0.0
    for i in range(n_points):
        act = _NONLINEAR[i % 3]
        d = 1 + i % 2
        target = TargetModel(rng.normal(size=d), act)
        X = rng.normal(size=(n_samples, d))
        p = _contractive_param(rng, act, d)
        g = empirical_risk_grad(p, target, act, X, _FD_SOLVER)
        ref = fd_grad(lambda q: empirical_risk(q, target, act, X, _FD_SOLVER), p, h)
        worst = max(worst, _rel_err(g, ref))
    return Check("empirical_risk_grad vs finite differences", worst, tol, worst <= tol,
                 {"points": n_points, "samples": n_samples, "h": h})


def gradcheck_suite(seed=0, n_points=200) -> list[Check]:
    return [check_implicit_grad(seed, n_points), check_linear_risk_grad(seed, n_points),
            check_empirical_risk_grad(seed, n_points)]


# -- linear gradient flow ----------------------------------------------------

def linear_instances(seed, n, d, name):
    """``n`` (target, moments, theta0) triples on uniform data, alternating sides of ``theta2 = 1``."""
    rng = named_stream(seed, f"{name}-d{d}")
    m = second_moment(DataModel("uniform", d))
    out = []
    for k in range(n):
        xi = np.array([2.0]) if d == 1 else rng.normal(size=d)
        th = rng.normal(0.0, 0.5, d + 1)
        while abs(1.0 - th[-1]) < 0.2:
            th = rng.normal(0.0, 0.5, d + 1)
        if (k % 2 == 1) == (th[-1] < 1.0):
            th[-1] = 2.0 - th[-1]
        out.append((TargetModel(xi), m, Parameter.from_vector(th)))
    return out


def _w_drift(traj):
    return float(np.max(np.abs(traj.w - traj.w[0])) / traj.w[0])


def check_conservation(seed=0, n_inits=20, dims=(1, 3), step=1e-3, horizon=10.0) -> list[Check]:
    """Relative drift of ``w`` under RK4, and its shrinkage when the step is halved."""
    drifts, ratios, floor_hits = [], [], 0
    floor = DRIFT_FLOOR_ULPS * np.finfo(float).eps
    for d in dims:
        for target, m, th in linear_instances(seed, n_inits, d, "conservation"):
            obj = LinearObjective(target, m)
            a = _w_drift(flow_integrate(obj, th, FlowConfig(step, horizon), target))
            b = _w_drift(flow_integrate(obj, th, FlowConfig(step / 2, horizon), target))
            drifts.append(a)
            if a <= floor:
                floor_hits += 1  # already at roundoff: nothing left for a smaller step to remove
                continue
            ratios.append(a / b if b > 0 else math.inf)
    worst = max(drifts)
    shrink = min(ratios) if ratios else None
    return [
        Check("conservation: max relative drift of w", worst, 1e-6, worst <= 1e-6,
              {"instances": len(drifts), "step": step, "horizon": horizon}),
        Check("conservation: drift shrink factor on halving the step", shrink, 8.0,
              bool(ratios) and shrink >= 8.0,
              {"resolved_instances": len(ratios), "at_roundoff_floor": floor_hits,
               "floor_relative": floor}),
    ]


def check_limit_point(seed=0, n_inits=20, dims=(1, 3), step=1e-3, max_horizon=5000.0,
                      grad_tol=1e-10, tol=1e-4) -> list[Check]:
    """Integrate until ``|grad R| < grad_tol`` and compare with both closed forms."""
    per_dim = max(1, n_inits // len(dims))
    errs, alt_errs, sides, unfinished = [], [], [0, 0], 0
    for d in dims:
        for target, m, th in linear_instances(seed, per_dim, d, "limit-point"):
            traj = flow_integrate(LinearObjective(target, m), th,
                                  FlowConfig(step, max_horizon, record_every=1000, grad_tol=grad_tol), target)
            if traj.grad_norm_sq[-1] >= grad_tol**2:
                unfinished += 1
            end = traj.thetas[-1]
            errs.append(float(np.linalg.norm(end - limit_point_linear(th, target.xi).as_vector())))
            alt_errs.append(float(np.linalg.norm(end - limit_point_origin_norm(th, target.xi).as_vector())))
            sides[th.theta2 > 1.0] += 1
    worst = max(errs)
    convention = "sign(1 - theta2(0)) * |theta(0) - (0,1)|" if worst <= tol else "neither"
    if max(alt_errs) <= tol:
        convention = "sign(theta2(0)) * |theta(0)|"
    return [Check("limit point matches conservation-law form", worst, tol, worst <= tol and unfinished == 0,
                  {"instances": len(errs), "below_singular_plane": sides[0], "above_singular_plane": sides[1],
                   "not_converged": unfinished, "matched_convention": convention,
                   "origin_norm_form_error_range": [min(alt_errs), max(alt_errs)]})]


def _phi_err(traj, xi):
    v = traj.phi - xi
    return np.einsum("ij,ij->i", v, v)


def check_linear_flow_rate(seed=0, n_instances=20, dims=(1, 3), step=1e-3, horizon=10.0,
                           beta_mode="min") -> Check:
    """``|phi(t) - xi|^2 <= |phi(0) - xi|^2 exp(-(4/beta^2) lambda_min t) (1 + 1e-6)`` pointwise.

    ``beta_mode="min"`` takes beta as the smallest ``|1 - theta2(t)|`` seen on the
    trajectory, as the rate statement prescribes. ``"max"`` uses the largest,
    which is what the derivative bound actually supports.
    """
    per_dim = max(1, n_instances // len(dims))
    worst, n_bad, total = 0.0, 0, 0
    for d in dims:
        for target, m, th in linear_instances(seed, per_dim, d, "linear-rate"):
            traj = flow_integrate(LinearObjective(target, m), th, FlowConfig(step, horizon), target)
            gap = np.abs(1.0 - traj.thetas[:, -1])
            beta = float(gap.min() if beta_mode == "min" else gap.max())
            e = _phi_err(traj, target.xi)
            bound = e[0] * np.exp(-(4.0 / beta**2) * m.lambda_min * traj.times) * (1.0 + 1e-6)
            ok = e <= bound
            n_bad += int(np.sum(~ok))
            total += 1
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(bound > 0, e / bound, np.where(e > 0, np.inf, 0.0))
            worst = max(worst, float(np.max(ratio)))
    return Check(f"linear flow exponential rate (beta = trajectory {beta_mode} of |1 - theta2|)",
                 worst, 1.0, n_bad == 0, {"instances": total, "violating_points": n_bad})


def linear_flow_suite(seed=0) -> list[Check]:
    return (check_conservation(seed) + check_limit_point(seed)
            + [check_linear_flow_rate(seed, beta_mode="min"), check_linear_flow_rate(seed, beta_mode="max")])


# -- linear gradient descent -------------------------------------------------

def check_gd_identity(seed=0, steps=10_000, eta=0.01, dims=(1, 3), tol=1e-12) -> Check:
    """``w(t+1) - w(t) = eta^2 |grad R(theta(t))|^2`` at every step, relative to ``w(t)``."""
    worst = 0.0
    for d in dims:
        target, m, th = linear_instances(seed, 1, d, "gd-identity")[0]
        traj = gd_run(LinearObjective(target, m), th, GdConfig(eta, steps), target)
        resid = np.abs(np.diff(traj.w) - eta**2 * traj.grad_norm_sq[:-1]) / traj.w[:-1]
        worst = max(worst, float(resid.max()))
    return Check("GD identity w(t+1) - w(t) = eta^2 |grad R|^2", worst, tol, worst <= tol,
                 {"steps": steps, "eta": eta})


def check_linear_gd_rate(seed=0, n_instances=10, steps=2000, n_samples=1000) -> Check:
    """With ``eta = eta0 / 10``, every per-step risk ratio stays below ``1 - eta / (kappa alpha^2)``."""
    rng = named_stream(seed, "linear-gd-rate")
    target = TargetModel([2.0])
    X = DataModel("uniform", 1, seed=seed).sample(n_samples)
    m = second_moment(DataModel.empirical(X))
    worst_gap, bad = -math.inf, 0
    etas = []
    for _ in range(n_instances):
        th = Parameter.from_vector(0.1 * rng.standard_normal(2))
        c = gd_constants_linear(th, target, m, seed=seed)
        eta = c.eta0 / 10.0
        etas.append(eta)
        traj = gd_run(LinearObjective(target, m), th, GdConfig(eta, steps), target)
        ratio = traj.risk[1:] / traj.risk[:-1]
        factor = c.factor_per_step(eta)
        bad += int(np.sum(ratio > factor))
        worst_gap = max(worst_gap, float(np.max(ratio - factor)))
    return Check("linear GD per-step risk ratio minus predicted factor", worst_gap, 0.0, bad == 0,
                 {"instances": n_instances, "steps": steps, "violations": bad,
                  "eta_range": [min(etas), max(etas)]})


def linear_gd_suite(seed=0) -> list[Check]:
    return [check_gd_identity(seed), check_linear_gd_rate(seed)]


# -- single-index models -----------------------------------------------------

def nonlinear_setup(act, d, seed=0, n_samples=500, delta1=0.1, delta2=None):
    """Target, data, region and ``alpha`` for a single-index instance on Unif[0,1]^d."""
    act = Activation.parse(act)
    xi = np.array([2.0]) if d == 1 else np.array([1.5, 1.0] + [0.5] * (d - 2))
    d2 = delta2 if delta2 is not None else min(1.0, 0.5 / act.lipschitz_bound)
    region = ParamRegion(delta1, d2, float(np.linalg.norm(xi)))
    X = DataModel("uniform", d, seed=seed).sample(n_samples)
    return TargetModel(xi, act), X, region, math.sqrt(d)


def ball_inits(seed, name, center, radius, n):
    """``n`` points uniform in the ball of ``radius`` about ``center``."""
    rng = named_stream(seed, name)
    k = center.size
    out = []
    for _ in range(n):
        u = rng.standard_normal(k)
        u /= np.linalg.norm(u)
        out.append(center + radius * rng.random() ** (1.0 / k) * u)
    return out


def check_nonlinear_flow(act, d, seed=0, n_instances=10, step=0.05, horizon=10.0, grid_n=9,
                         ball_grid_n=7) -> list[Check]:
    """Monotone ``r(t)`` and ``r(T) <= r(0) exp(-lambda1 T)`` with region and per-run ball constants."""
    act = Activation.parse(act)
    target, X, region, alpha = nonlinear_setup(act, d, seed)
    nc = gd_constants_nonlinear(region, target, act, X, alpha, grid_n=grid_n)
    obj = EmpiricalObjective(target, act, X)
    center = np.append(target.xi, 0.0)
    mono_bad, worst, worst_ball, ball_rates = 0, 0.0, 0.0, []
    for th in ball_inits(seed, f"nl-flow-{act.kind}-{d}", center, region.init_radius, n_instances):
        traj = flow_integrate(obj, th, FlowConfig(step, horizon), target)
        if traj.status != "ok" or not check_monotone(traj.r, slack=1e-10).ok:
            mono_bad += 1
        T = traj.times[-1]
        worst = max(worst, float(traj.r[-1] / (traj.r[0] * math.exp(-nc.lambda1 * T))))
        ball = BallRegion(target.xi, math.sqrt(traj.r[0]))
        bc = gd_constants_nonlinear(ball, target, act, X, alpha, grid_n=ball_grid_n)
        ball_rates.append(bc.lambda1)
        worst_ball = max(worst_ball, float(traj.r[-1] / (traj.r[0] * math.exp(-bc.lambda1 * T))))
    tag = f"{act.kind}, d={d}"
    return [
        Check(f"nonlinear flow r(t) nonincreasing ({tag})", mono_bad, 0, mono_bad == 0,
              {"instances": n_instances}),
        Check(f"nonlinear flow r(T) <= r(0) exp(-lambda1 T), region constants ({tag})", worst, 1.0,
              worst <= 1.0, {"rho": nc.rho, "gamma": nc.gamma, "lambda1": nc.lambda1,
                             "applicable": nc.applicable, "rho_argmin": nc.rho_detail.argmin.as_vector().tolist(),
                             "grid_n": grid_n, "horizon": horizon}),
        Check(f"nonlinear flow r(T) <= r(0) exp(-lambda1 T), ball constants ({tag})", worst_ball, 1.0,
              worst_ball <= 1.0, {"lambda1_range": [min(ball_rates), max(ball_rates)], "grid_n": ball_grid_n}),
    ]


def nonlinear_flow_suite(seed=0, n_instances=10) -> list[Check]:
    out = []
    for act in (Activation.SIGMOID, Activation.TANH):
        for d in (1, 2):
            out += check_nonlinear_flow(act, d, seed, n_instances)
    return out


def check_nonlinear_gd(seed=0, n_instances=10, steps=200, cases=((Activation.SIGMOID, 1), (Activation.SIGMOID, 2)),
                       grid_n=9) -> Check:
    """With ``eta = lambda1 / (2 lambda2)``, every ``r(t+1)/r(t) <= 1 - eta lambda1 / 2``."""
    per_case = max(1, n_instances // len(cases))
    bad, worst, detail = 0, -math.inf, []
    for act, d in cases:
        act = Activation.parse(act)
        target, X, region, alpha = nonlinear_setup(act, d, seed)
        nc = gd_constants_nonlinear(region, target, act, X, alpha, grid_n=grid_n)
        detail.append({"activation": act.kind, "d": d, "eta_max": nc.eta_max, "lambda1": nc.lambda1,
                       "lambda2": nc.lambda2})
        if not nc.eta_max > 0:
            bad += per_case
            continue
        obj = EmpiricalObjective(target, act, X)
        center = np.append(target.xi, 0.0)
        factor = nc.factor_per_step(nc.eta_max)
        for th in ball_inits(seed, f"nl-gd-{act.kind}-{d}", center, region.init_radius, per_case):
            traj = gd_run(obj, th, GdConfig(nc.eta_max, steps), target)
            ratio = traj.r[1:] / traj.r[:-1]
            bad += int(np.sum(ratio > factor)) + (traj.status != "ok")
            worst = max(worst, float(np.max(ratio - factor)))
    return Check("nonlinear GD per-step r ratio minus predicted factor", worst, 0.0, bad == 0,
                 {"instances": per_case * len(cases), "steps": steps, "violations": bad, "cases": detail})


def nonlinear_gd_suite(seed=0) -> list[Check]:
    return [check_nonlinear_gd(seed)]


# -- constants ---------------------------------------------------------------

def check_negative_control(seed=0, grid_n=9, n_samples=2000) -> list[Check]:
    """Linear activation: the nonlinearity constant vanishes and the nonlinear theorems are flagged."""
    target = TargetModel([2.0])
    region = ParamRegion(0.1, 0.5, 2.0)
    data = DataModel("uniform", 1, seed=seed)
    rho = rho_estimate(region, target, Activation.LINEAR, data, 1.0, grid_n=grid_n, n_mc=n_samples)
    nc = gd_constants_nonlinear(region, target, Activation.LINEAR, data.sample(n_samples), 1.0, grid_n=grid_n)
    return [
        Check("linear activation: rho estimate", rho.value, RHO_FLOOR, rho.value <= RHO_FLOOR, rho.to_dict()),
        Check("linear activation: nonlinear theorems flagged inapplicable", nc.lambda1, 0.0,
              (not nc.applicable) and nc.lambda1 == 0.0, {"applicable": nc.applicable}),
    ]


def check_positive_constants(act="sigmoid", seed=0, grid_n=9) -> list[Check]:
    """Desk instance: positive rho, grid stability, the |y| <= M sweep and gamma monotonicity."""
    act = Activation.parse(act)
    target, X, region, alpha = nonlinear_setup(act, 1, seed, n_samples=2000)
    nc = gd_constants_nonlinear(region, target, act, X, alpha, grid_n=grid_n)
    coarse = rho_estimate(region, target, act, X, alpha, grid_n=5)
    change = abs(coarse.value - nc.rho) / nc.rho if nc.rho > 0 else math.inf
    rng = named_stream(seed, f"m-sweep-{act.kind}")
    M = constant_M(act, alpha, region.delta1, region.delta2, region.norm_xi)
    worst_y = 0.0
    for _ in range(1000):
        u = rng.standard_normal(1)
        t1 = u / np.linalg.norm(u) * region.theta1_radius * rng.random()
        p = Parameter(t1, rng.uniform(-region.delta2, region.delta2))
        x = rng.uniform(-alpha, alpha, size=(1, 1))
        worst_y = max(worst_y, abs(float(solve_outputs(p, act, x)[0])))
    radii = np.linspace(0.0, 5.0, 51)
    gam = np.array([gamma_inf(act, r, n_grid=10_001) for r in radii])
    gamma_ok = bool(np.all(np.diff(gam) <= 1e-15))
    obj = EmpiricalObjective(target, act, X)
    th0 = np.append(target.xi, 0.0) + 0.5 * region.init_radius * np.array([1.0, -1.0]) / math.sqrt(2.0)
    traj = flow_integrate(obj, th0, FlowConfig(0.05, 10.0), target)
    measured = estimate_rate(traj, "r")
    tag = act.kind
    return [
        Check(f"{tag}: rho positive", nc.rho, RHO_FLOOR, nc.rho > RHO_FLOOR, nc.rho_detail.to_dict()),
        Check(f"{tag}: theorems applicable with positive step bound", nc.eta_max, 0.0,
              nc.applicable and nc.eta_max > 0, {"lambda1": nc.lambda1, "lambda2": nc.lambda2}),
        Check(f"{tag}: rho relative change from grid 5 to grid {grid_n}", change, 0.1, change < 0.1,
              {"rho_coarse": coarse.value, "rho_fine": nc.rho}),
        Check(f"{tag}: max |y| over random region points <= M", worst_y, M, worst_y <= M),
        Check(f"{tag}: gamma_inf nonincreasing in radius", float(np.max(np.diff(gam))), 0.0, gamma_ok),
        Check(f"{tag}: lambda1 does not exceed the measured flow rate", nc.lambda1, measured,
              nc.lambda1 <= measured),
    ]


def check_linear_constants(seed=0) -> list[Check]:
    """Closed-form linear constants: the limit point is stationary and on the conservation sphere."""
    target, m, th = linear_instances(seed, 1, 1, "linear-constants")[0]
    lp = limit_point_linear(th, target.xi)
    g = float(np.linalg.norm(linear_risk_grad(lp, target, m)))
    w0 = float(th.theta1 @ th.theta1 + (1 - th.theta2) ** 2)
    w1 = float(lp.theta1 @ lp.theta1 + (1 - lp.theta2) ** 2)
    return [
        Check("limit point is stationary", g, 1e-10, g <= 1e-10),
        Check("limit point conserves w", abs(w1 - w0) / w0, 1e-14, abs(w1 - w0) / w0 <= 1e-14),
    ]


def constants_suite(seed=0, activation="sigmoid") -> list[Check]:
    out = check_negative_control(seed) + check_linear_constants(seed)
    act = Activation.parse(activation)
    if act is not Activation.LINEAR:
        out += check_positive_constants(act, seed)
    return out


_RUNNERS = {
    "gradcheck": gradcheck_suite,
    "linear-flow": linear_flow_suite,
    "linear-gd": linear_gd_suite,
    "nonlinear-flow": nonlinear_flow_suite,
    "nonlinear-gd": nonlinear_gd_suite,
    "constants": constants_suite,
}


def run_suite(suite: str, seed: int = 0, **kw) -> dict:
    """Run a suite; the report's ``status`` is ``"pass"`` iff every check passed."""
    if suite not in _RUNNERS:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    checks = _RUNNERS[suite](seed, **kw)
    return {"suite": suite, "seed": seed, "checks": [c.to_dict() for c in checks],
            "status": "pass" if all(c.passed for c in checks) else "fail"}
