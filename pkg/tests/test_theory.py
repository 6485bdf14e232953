import math

import numpy as np
import pytest

from deqflow.errors import ContractionError, RankError
from deqflow.model import Activation, Parameter, TargetModel
from deqflow.risk import DataModel, MomentSummary, second_moment
from deqflow.theory import (
    BallRegion,
    ParamRegion,
    constant_M,
    gamma_inf,
    gd_constants_linear,
    gd_constants_nonlinear,
    limit_point_linear,
    limit_point_origin_norm,
    linear_flow_rate,
    rho_estimate,
)

# mpmath oracles (50 digits), frozen
DTANH_1 = 0.41997434161402606939
DSIGMOID_1 = 0.19661193324148185254
LIMIT_A = (0.80993826925266347733, 0.59503086537366826134)  # theta0 = (0.1, 0.1), xi = 2
LIMIT_B = (-0.80993826925266347733, 1.4049691346263317387)  # theta0 = (0.1, 1.9), xi = 2
RISK0 = 1.1893004115226337449  # R(0.1, 0.1) with Sigma = 1/3, xi = 2
C0 = 1.8888888888888888889  # sqrt(RISK0 / (1/3))


def test_gamma_examples():
    assert gamma_inf("tanh", 1.0) == pytest.approx(DTANH_1, rel=1e-12)
    assert gamma_inf("sigmoid", 1.0) == pytest.approx(DSIGMOID_1, rel=1e-12)
    assert gamma_inf("sigmoid", 0.0) == 0.25
    assert gamma_inf("sigmoid", 2.0) < gamma_inf("sigmoid", 1.0)


def test_gamma_rejects_negative_radius():
    with pytest.raises(ValueError):
        gamma_inf("tanh", -1.0)


def test_constant_M_examples():
    assert constant_M("tanh", 1.0, 0.1, 0.5, 2.0) == pytest.approx(2.2 / 0.5)
    assert constant_M("sigmoid", 1.0, 0.1, 0.5, 2.0) == pytest.approx((0.5 + 0.25 * 2.2) / 0.875)
    with pytest.raises(ContractionError):
        constant_M("tanh", 1.0, 0.1, 1.0, 2.0)


def test_limit_point_oracles():
    np.testing.assert_allclose(limit_point_linear(Parameter([0.1], 0.1), [2.0]).as_vector(), LIMIT_A, rtol=1e-15)
    np.testing.assert_allclose(limit_point_linear(Parameter([0.1], 1.9), [2.0]).as_vector(), LIMIT_B, rtol=1e-15)


def test_limit_point_lies_on_solution_line_and_sphere():
    p0 = Parameter([0.3, -0.4], -0.2)
    xi = np.array([1.0, 2.0])
    lp = limit_point_linear(p0, xi)
    np.testing.assert_allclose(lp.theta1 / (1 - lp.theta2), xi)
    w0 = 0.25 + 1.44
    assert lp.theta1 @ lp.theta1 + (lp.theta2 - 1) ** 2 == pytest.approx(w0)


def test_origin_norm_convention_differs():
    a = limit_point_origin_norm(Parameter([0.1], 0.1), [2.0]).as_vector()
    assert np.linalg.norm(a - np.array(LIMIT_A)) > 0.1


def test_linear_flow_rate():
    assert linear_flow_rate(1 / 3, 2.0) == pytest.approx(1 / 3)


def test_linear_gd_constants_example():
    m = MomentSummary(np.array([[1 / 3]]), 1 / 3, 1 / 3)
    c = gd_constants_linear(Parameter([0.1], 0.1), TargetModel([2.0]), m, n_pairs=2000)
    assert c.risk0 == pytest.approx(RISK0, rel=1e-14)
    assert c.c0 == pytest.approx(C0, rel=1e-14)
    assert c.kappa == 1.0
    assert c.w0 == pytest.approx(0.82)
    assert 0 < c.beta <= 0.9 and 0 < c.eta0 <= c.beta / 2
    assert 0 < c.factor_per_step(c.eta0) < 1


def test_linear_gd_constants_rank_error():
    m = MomentSummary(np.diag([1.0, 0.0]), 0.0, 1.0)
    with pytest.raises(RankError):
        gd_constants_linear(Parameter([0.1, 0.1], 0.1), TargetModel([1.0, 1.0]), m)


def test_param_region_grid_and_contains():
    r = ParamRegion(0.1, 0.5, 2.0)
    pts = r.grid(5, 1)
    assert all(r.contains(p, 1e-12) for p in pts)
    assert len(pts) == 25
    assert r.init_radius == 0.5


def test_rho_vanishes_for_linear_model():
    r = ParamRegion(0.1, 0.5, 2.0)
    est = rho_estimate(r, TargetModel([2.0]), "linear", DataModel("uniform", 1, seed=0), alpha=1.0, grid_n=5)
    assert est.value <= 1e-8


def test_rho_vanishes_for_odd_activation_on_full_region():
    """theta1 = 0 lies in the region and gives y = tanh(theta2 y) = 0."""
    r = ParamRegion(0.1, 0.5, 2.0)
    est = rho_estimate(r, TargetModel([2.0], "tanh"), "tanh", DataModel("uniform", 1, seed=0), alpha=1.0,
                       grid_n=5)
    assert est.value <= 1e-8


def test_ball_region_rho_positive_for_tanh():
    ball = BallRegion((2.0,), 0.3)
    assert ball.delta2 == 0.3 and ball.delta1 == pytest.approx(0.15)
    c = gd_constants_nonlinear(ball, TargetModel([2.0], "tanh"), "tanh", DataModel("uniform", 1, seed=0),
                               alpha=1.0, grid_n=5, n_mc=500)
    assert c.rho > 1e-4 and c.applicable and c.lambda1 > 0 and c.eta_max > 0
    assert all(ball.contains(p, 1e-12) for p in ball.grid(5, 1))


def test_sigmoid_constants_positive_and_consistent():
    r = ParamRegion(0.1, 1.0, 2.0)
    c = gd_constants_nonlinear(r, TargetModel([2.0], "sigmoid"), "sigmoid", DataModel("uniform", 1, seed=0),
                               alpha=1.0, grid_n=5, n_mc=500)
    assert c.applicable and c.rho > 0
    assert c.lambda1 == pytest.approx(2 * c.rho * c.gamma**2 / 1.25)
    assert c.eta_max == pytest.approx(c.lambda1 / (2 * c.lambda2))
    assert c.gamma == pytest.approx(gamma_inf("sigmoid", c.gamma_radius))
    assert math.isclose(c.factor_per_step(c.eta_max), 1 - c.eta_max * c.lambda1 / 2)


def test_region_contraction_check():
    with pytest.raises(ContractionError):
        ParamRegion(0.1, 1.0, 2.0).check(Activation.TANH)


def test_uniform_moments_condition_number():
    assert second_moment(DataModel("uniform", 1)).kappa == pytest.approx(1.0)
