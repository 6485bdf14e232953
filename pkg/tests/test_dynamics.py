import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deqflow.dynamics import (
    FlowConfig,
    GdConfig,
    check_monotone,
    estimate_rate,
    flow_integrate,
    gd_run,
)
from deqflow.errors import IntegrationError
from deqflow.model import Activation, Parameter, TargetModel
from deqflow.risk import DataModel, EmpiricalObjective, LinearObjective, MomentSummary, second_moment
from deqflow.theory import limit_point_linear

XI = TargetModel([2.0])
THIRD = MomentSummary(np.array([[1 / 3]]), 1 / 3, 1 / 3)
LIN = LinearObjective(XI, THIRD)


def _quadratic(theta):
    return float(theta @ theta), 2.0 * theta


def test_stationary_on_solution_line():
    tr = flow_integrate(LIN, [1.0, 0.5], FlowConfig(1e-3, 1.0), XI)
    np.testing.assert_allclose(tr.thetas[-1], [1.0, 0.5], atol=1e-12)


def test_conservation_desk_instance():
    tr = flow_integrate(LIN, [0.1, 0.1], FlowConfig(1e-3, 10.0), XI)
    assert tr.w[0] == pytest.approx(0.82)
    assert np.max(np.abs(tr.w - 0.82)) / 0.82 <= 1e-6


def test_desk_instance_reaches_limit_point():
    tr = flow_integrate(LIN, [0.1, 0.1], FlowConfig(1e-3, 2000.0, record_every=1000, grad_tol=1e-12), XI)
    lp = limit_point_linear(Parameter([0.1], 0.1), [2.0])
    assert np.linalg.norm(tr.thetas[-1] - lp.as_vector()) <= 1e-4
    # long-horizon integration oracle, recorded to six digits
    np.testing.assert_allclose(tr.thetas[-1], [0.809938, 0.595031], atol=1e-6)


def test_generic_rk4_matches_linear_kernel():
    fast = flow_integrate(LIN, [0.3, -0.2], FlowConfig(1e-2, 2.0), XI)
    slow = flow_integrate(lambda th: LIN(th), [0.3, -0.2], FlowConfig(1e-2, 2.0), XI)
    np.testing.assert_allclose(fast.thetas, slow.thetas, rtol=1e-13, atol=1e-15)


def test_rk4_on_quadratic_is_fourth_order():
    target = TargetModel([1.0], "sigmoid")
    errs = []
    for h in (0.1, 0.05):
        tr = flow_integrate(_quadratic, [1.0, 0.0], FlowConfig(h, 1.0), target)
        errs.append(abs(tr.thetas[-1, 0] - math.exp(-2.0)))
    assert 14 < errs[0] / errs[1] < 18


def test_guard_trip_is_reported():
    tr = flow_integrate(LIN, [0.0, 1.0 - 1e-9], FlowConfig(1e-3, 1.0), XI)
    assert tr.status == "singular" and len(tr) == 0
    tr = gd_run(LIN, [0.1, 1.0 + 1e-9], GdConfig(0.1, 5), XI)
    assert tr.status == "singular"


def test_non_finite_raises():
    with pytest.raises(IntegrationError):
        gd_run(lambda th: (math.nan, th), [1.0, 0.0], GdConfig(0.1, 2), TargetModel([1.0], "tanh"))


def test_zero_gradient_start_is_constant():
    tr = gd_run(LIN, [1.0, 0.5], GdConfig(0.5, 10), XI)
    assert np.all(tr.thetas == tr.thetas[0])


@given(st.floats(-2, 2), st.floats(-2, 4).filter(lambda t: abs(1 - t) > 0.3), st.floats(1e-3, 0.05))
def test_gd_w_recursion(t1, t2, eta):
    tr = gd_run(LIN, [t1, t2], GdConfig(eta, 50), XI)
    if tr.status != "ok":
        return
    resid = np.abs(np.diff(tr.w) - eta**2 * tr.grad_norm_sq[:-1]) / tr.w[:-1]
    assert resid.max() <= 1e-12
    assert check_monotone(tr.w, direction="nondecreasing").ok


def test_linear_reference_gd():
    X = DataModel("uniform", 1, seed=0).sample(1000)
    obj = LinearObjective(XI, second_moment(DataModel.empirical(X)))
    tr = gd_run(obj, [0.05, -0.1], GdConfig(0.01, 200), XI)
    assert tr.risk[-1] < 1e-3
    assert check_monotone(tr.w, direction="nondecreasing").ok


def test_zero_epochs():
    tr = gd_run(LIN, [0.1, 0.1], GdConfig(0.01, 0), XI)
    assert len(tr) == 1 and tr.risk[0] == pytest.approx(LIN(np.array([0.1, 0.1]))[0])


def test_estimate_rate():
    t = np.linspace(0, 2, 50)
    assert estimate_rate((t, np.exp(-3 * t))) == pytest.approx(3.0, abs=1e-6)
    with pytest.raises(ValueError):
        estimate_rate((t, np.zeros_like(t)))


def test_check_monotone():
    assert check_monotone([1, 1, 1]).ok and check_monotone([1, 1, 1], direction="nondecreasing").ok
    m = check_monotone([3.0, 2.0, 2.5, 1.0])
    assert not m.ok and m.first_violation == 2
    with pytest.raises(ValueError):
        check_monotone([1.0], direction="up")


def test_linear_flow_rate_with_largest_gap():
    """The rate exponent 4 lambda_min / beta^2 holds with beta the largest |1 - theta2(t)|."""
    for th0 in ([0.1, 0.1], [-0.4, 1.6], [0.5, -0.5]):
        tr = flow_integrate(LIN, th0, FlowConfig(1e-3, 10.0), XI)
        beta = np.max(np.abs(1 - tr.thetas[:, 1]))
        e = (tr.phi[:, 0] - 2.0) ** 2
        assert np.all(e <= e[0] * np.exp(-4 / beta**2 / 3 * tr.times) * (1 + 1e-6))


def test_sigmoid_gd_in_ball_is_monotone():
    t = TargetModel([2.0], "sigmoid")
    X = DataModel("uniform", 1, seed=0).sample(200)
    tr = gd_run(EmpiricalObjective(t, "sigmoid", X), [2.3, 0.4], GdConfig(0.1, 100), t)
    assert check_monotone(tr.r).ok


def test_config_validation():
    with pytest.raises(ValueError):
        GdConfig(0.0, 5)
    with pytest.raises(ValueError):
        GdConfig(0.1, -1)
    with pytest.raises(ValueError):
        FlowConfig(step=-1.0)
