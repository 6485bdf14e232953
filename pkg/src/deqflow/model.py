"""Parameters, activations and the DEQ map ``g_theta(x, y) = sigma(theta1 . x + theta2 * y)``."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularityError

#: Denominators ``|1 - theta2|`` below this raise instead of returning huge values.
EPS_SING = 1e-8


@dataclass(frozen=True, eq=False)
class Parameter:
    """DEQ parameter ``theta = (theta1, theta2)`` with ``theta1`` in R^d."""

    theta1: np.ndarray
    theta2: float

    def __post_init__(self):
        t1 = np.array(self.theta1, dtype=float).reshape(-1)
        if t1.size < 1:
            raise DimensionError("theta1 must have at least one entry")
        t2 = float(self.theta2)
        if not (np.all(np.isfinite(t1)) and math.isfinite(t2)):
            raise ValueError("parameter entries must be finite")
        t1.setflags(write=False)
        object.__setattr__(self, "theta1", t1)
        object.__setattr__(self, "theta2", t2)

    def __eq__(self, other):
        if not isinstance(other, Parameter):
            return NotImplemented
        return self.theta2 == other.theta2 and np.array_equal(self.theta1, other.theta1)

    def __hash__(self):
        return hash((self.theta1.tobytes(), self.theta2))

    @property
    def dim(self) -> int:
        return self.theta1.size

    def as_vector(self) -> np.ndarray:
        """Flat ``(theta1, theta2)`` vector of length ``d + 1``."""
        return np.append(self.theta1, self.theta2)

    @classmethod
    def from_vector(cls, v) -> "Parameter":
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size < 2:
            raise DimensionError("parameter vector needs length >= 2")
        return cls(v[:-1], v[-1])


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _softplus(z):
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


class Activation(enum.Enum):
    """Closed set of monotone activations with certified Lipschitz bounds."""

    LINEAR = "linear"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    SOFTPLUS = "softplus"

    @property
    def kind(self) -> str:
        return self.value

    @property
    def lipschitz_bound(self) -> float:
        return 0.25 if self is Activation.SIGMOID else 1.0

    @property
    def code(self) -> int:
        """Integer tag understood by the compiled kernels."""
        return _CODES[self]

    def evaluate(self, z):
        if self is Activation.LINEAR:
            return np.asarray(z, dtype=float) * 1.0
        if self is Activation.SIGMOID:
            return _sigmoid(z)
        if self is Activation.TANH:
            return np.tanh(z)
        return _softplus(z)

    def derivative(self, z):
        if self is Activation.LINEAR:
            return np.ones_like(np.asarray(z, dtype=float))
        if self is Activation.SIGMOID:
            s = _sigmoid(z)
            return s * (1.0 - s)
        if self is Activation.TANH:
            t = np.tanh(z)
            return 1.0 - t * t
        return _sigmoid(z)

    @classmethod
    def parse(cls, name) -> "Activation":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown activation {name!r}; choose from "
                             f"{[a.value for a in cls]}") from None


_CODES = {Activation.LINEAR: 0, Activation.SIGMOID: 1, Activation.TANH: 2, Activation.SOFTPLUS: 3}


@dataclass(frozen=True)
class TargetModel:
    """Teacher ``f(x) = sigma(xi . x)``; identity activation gives the linear target."""

    xi: np.ndarray
    activation: Activation = Activation.LINEAR

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float).reshape(-1)
        if xi.size < 1 or not np.any(xi != 0):
            raise ValueError("xi must be a nonzero vector")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "activation", Activation.parse(self.activation))

    @property
    def dim(self) -> int:
        return self.xi.size

    @property
    def optimum(self) -> Parameter:
        """The well-specified parameter ``(xi, 0)``."""
        return Parameter(self.xi, 0.0)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionError(f"inputs have dimension {X.shape[1]}, target has {self.dim}")
        return self.activation.evaluate(X @ self.xi)


@dataclass(frozen=True)
class FixedPointResult:
    y: float
    preactivation: float
    residual: float
    iterations: int


def _dot(param: Parameter, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != param.dim:
        raise DimensionError(f"x has dimension {x.size}, theta1 has {param.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    return float(param.theta1 @ x)


def scaled_norm(v) -> float:
    """Euclidean norm that neither underflows nor overflows for extreme entries."""
    v = np.asarray(v, dtype=float).reshape(-1)
    m = float(np.max(np.abs(v))) if v.size else 0.0
    if m == 0.0 or not math.isfinite(m):
        return m
    return m * math.sqrt(float(np.sum((v / m) ** 2)))


def eval_g(param: Parameter, activation: Activation, x, y: float) -> float:
    """One application of the DEQ map at ``(x, y)``."""
    z = _dot(param, x) + param.theta2 * float(y)
    return float(Activation.parse(activation).evaluate(z))


def closed_form_linear_output(param: Parameter, x) -> float:
    """Equilibrium of the linear DEQ, ``theta1 . x / (1 - theta2)``."""
    a = _dot(param, x)
    denom = 1.0 - param.theta2
    if abs(denom) < EPS_SING:
        raise SingularityError(f"|1 - theta2| = {abs(denom):.3e} below {EPS_SING:g}")
    return a / denom


def contraction_modulus(param: Parameter, activation: Activation) -> float:
    return Activation.parse(activation).lipschitz_bound * abs(param.theta2)
