import numpy as np
import pytest

from deqflow import kernels
from deqflow.model import Activation

pytestmark = pytest.mark.skipif(not kernels.compiled_available(), reason="compiled kernels not built")

PY = kernels.get_backend("python")


@pytest.fixture(scope="module")
def C():
    return kernels.get_backend("compiled")


@pytest.mark.parametrize("act", ["sigmoid", "tanh", "softplus"])
@pytest.mark.parametrize("method", [kernels.PICARD, kernels.BRENT])
def test_solve_batch_parity(C, act, method, rng):
    code = Activation.parse(act).code
    X = rng.uniform(-1, 1, (300, 3))
    t1 = rng.normal(size=3)
    t2 = 0.5 / Activation.parse(act).lipschitz_bound
    a = PY.solve_batch(code, t1, t2, X, method, 1e-13, 500)
    b = C.solve_batch(code, t1, t2, X, method, 1e-13, 500)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


def test_risk_grad_parity(C, rng):
    code = Activation.SIGMOID.code
    X = rng.uniform(-1, 1, (400, 2))
    t1, t2 = np.array([1.0, -0.5]), 0.7
    y, _, _ = C.solve_batch(code, t1, t2, X, kernels.BRENT, 1e-14, 200)
    f = rng.uniform(0, 1, 400)
    r1, g1, b1 = PY.risk_grad_batch(code, t1, t2, X, f, y)
    r2, g2, b2 = C.risk_grad_batch(code, t1, t2, X, f, y)
    assert r1 == r2 and np.array_equal(g1, g2) and b1 == b2 == -1


def test_linear_rk4_parity(C):
    S = np.array([[1 / 3, 0.1], [0.1, 0.5]])
    xi = np.array([1.0, 2.0])
    th = np.array([0.2, -0.1, 0.3])
    a = PY.linear_rk4(S, xi, th, 1e-2, 500, 7, 0.0, 1e-10)
    b = C.linear_rk4(S, xi, th, 1e-2, 500, 7, 0.0, 1e-10)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) and a[2] == b[2] == 0
    assert a[0][-1] == 500


def test_linear_rk4_guard_and_early_stop(C):
    S = np.array([[1 / 3]])
    xi = np.array([2.0])
    for be in (PY, C):
        steps, rows, status = be.linear_rk4(S, xi, np.array([0.0, 1.0 - 1e-12]), 1e-3, 10, 1, 0.0, 1e-10)
        assert status == 1 and len(steps) == 0
        steps, rows, status = be.linear_rk4(S, xi, np.array([1.0, 0.5]), 1e-3, 10, 1, 1e-8, 1e-10)
        assert status == 0 and list(steps) == [0]


def test_backend_selection():
    assert kernels.get_backend("python") is PY
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
