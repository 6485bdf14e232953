import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deqflow.errors import DimensionError, SingularityError
from deqflow.model import (
    Activation,
    Parameter,
    TargetModel,
    closed_form_linear_output,
    contraction_modulus,
    eval_g,
)

SIGMOID_1 = 0.73105857863000487925  # mpmath, 40 digits


def test_parameter_roundtrip_and_readonly():
    p = Parameter([1.0, -2.0], 0.3)
    assert p.dim == 2
    np.testing.assert_array_equal(p.as_vector(), [1.0, -2.0, 0.3])
    assert Parameter.from_vector(p.as_vector()) == p
    assert Parameter([1.0, -2.0], 0.4) != p
    assert len({p, Parameter.from_vector([1.0, -2.0, 0.3])}) == 1
    with pytest.raises(ValueError):
        p.theta1[0] = 5.0


@pytest.mark.parametrize("bad", [([], 0.0), ([np.nan], 0.0), ([1.0], math.inf)])
def test_parameter_rejects_bad_entries(bad):
    with pytest.raises((ValueError, DimensionError)):
        Parameter(*bad)


def test_from_vector_needs_two_entries():
    with pytest.raises(DimensionError):
        Parameter.from_vector([1.0])


@pytest.mark.parametrize("theta1, theta2, act, x, y, expected", [
    ([2.0], 0.0, "linear", [0.5], 7.0, 1.0),
    ([2.0], 0.0, "sigmoid", [0.5], 0.0, SIGMOID_1),
    ([1.0, 1.0], 0.5, "linear", [1.0, 2.0], 2.0, 4.0),
])
def test_eval_g(theta1, theta2, act, x, y, expected):
    assert eval_g(Parameter(theta1, theta2), act, x, y) == pytest.approx(expected, abs=1e-15)


def test_eval_g_dimension_mismatch():
    with pytest.raises(DimensionError):
        eval_g(Parameter([1.0, 2.0], 0.0), "tanh", [1.0], 0.0)


@pytest.mark.parametrize("theta1, theta2, x, expected", [([1.0], 0.5, [1.0], 2.0), ([2.0], 0.0, [0.3], 0.6)])
def test_closed_form_linear_output(theta1, theta2, x, expected):
    assert closed_form_linear_output(Parameter(theta1, theta2), x) == pytest.approx(expected, rel=1e-15)


def test_closed_form_singular():
    with pytest.raises(SingularityError):
        closed_form_linear_output(Parameter([1.0], 1 - 1e-15), [1.0])


@pytest.mark.parametrize("theta2, act, expected", [(0.5, "sigmoid", 0.125), (0.0, "tanh", 0.0), (1.2, "tanh", 1.2)])
def test_contraction_modulus(theta2, act, expected):
    assert contraction_modulus(Parameter([1.0], theta2), act) == pytest.approx(expected)


def test_activation_parse_and_codes():
    assert Activation.parse("Sigmoid") is Activation.SIGMOID
    assert [a.code for a in Activation] == [0, 1, 2, 3]
    with pytest.raises(ValueError, match="unknown activation"):
        Activation.parse("relu")


def test_stable_evaluation_at_extremes():
    z = np.array([-800.0, 800.0])
    np.testing.assert_allclose(Activation.SIGMOID.evaluate(z), [0.0, 1.0])
    np.testing.assert_allclose(Activation.SOFTPLUS.evaluate(z), [0.0, 800.0])
    assert np.all(np.isfinite(Activation.SIGMOID.derivative(z)))


@given(st.sampled_from(list(Activation)), st.floats(-30, 30))
def test_derivative_matches_central_difference(act, z):
    h = 1e-6
    fd = (float(act.evaluate(z + h)) - float(act.evaluate(z - h))) / (2 * h)
    assert float(act.derivative(z)) == pytest.approx(fd, abs=1e-8)


@given(st.sampled_from(list(Activation)), st.floats(-20, 20), st.floats(-20, 20))
def test_lipschitz_bound_holds(act, a, b):
    lhs = abs(float(act.evaluate(a)) - float(act.evaluate(b)))
    assert lhs <= act.lipschitz_bound * abs(a - b) + 1e-12


def test_target_model():
    t = TargetModel([2.0], "sigmoid")
    assert t(np.array([[0.5]]))[0] == pytest.approx(SIGMOID_1)
    assert np.array_equal(t.optimum.as_vector(), [2.0, 0.0])
    with pytest.raises(ValueError):
        TargetModel([0.0])
    with pytest.raises(DimensionError):
        t(np.ones((3, 2)))
