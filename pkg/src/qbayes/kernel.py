"""Quantum kernels, Gram matrices and representer-theorem models.

The kernel of an encoding is k(x, x') = tr(rho(x') rho(x)) = |<phi(x')|phi(x)>|^2.
Kernel ridge regression minimizes

    (1/M) sum_m (y_m - f(x_m))^2 + gamma * ||f||^2

over f(x) = sum_m alpha_m k(x_m, x), whose minimizer is
alpha = (K + gamma*M*I)^{-1} y.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encode import EncodingSpec, encode, encoded_amplitudes, feature_density
from .errors import InvalidArgument, NumericalError, SingularMatrixError

DUALITY_TOL = 1e-10
PINV_RCOND = 1e-10
#: reciprocal-condition floor below which an unregularized Gram counts as singular
SINGULAR_RCOND = 1e-12


def kernel_value_overlap(x, x2, spec: EncodingSpec) -> float:
    a = encode(x, spec).amplitudes
    b = encode(x2, spec).amplitudes
    return float(abs(np.vdot(b, a)) ** 2)


def kernel_value_trace(x, x2, spec: EncodingSpec) -> float:
    rho = feature_density(x, spec).entries
    rho2 = feature_density(x2, spec).entries
    return float(np.real(np.einsum("ij,ji->", rho2, rho)))


def kernel_value(x, x2, spec: EncodingSpec, cross_check: bool = False) -> float:
    """Quantum kernel k(x, x2).

    Evaluated as a squared state overlap. With ``cross_check=True`` the
    density-matrix trace is computed as well and a disagreement above 1e-10
    raises :class:`NumericalError`.
    """
    value = kernel_value_overlap(x, x2, spec)
    if cross_check:
        other = kernel_value_trace(x, x2, spec)
        if abs(value - other) > DUALITY_TOL:
            raise NumericalError(f"kernel routes disagree: overlap={value}, trace={other}")
    return value


def cross_gram(xs, zs, spec: EncodingSpec) -> np.ndarray:
    """Matrix with entries k(xs[i], zs[j])."""
    A = encoded_amplitudes(xs, spec)
    B = encoded_amplitudes(zs, spec)
    return np.abs(A.conj() @ B.T) ** 2


def gram_matrix(xs, spec: EncodingSpec) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[0] == 0:
        raise InvalidArgument("gram_matrix needs at least one sample")
    G = cross_gram(xs, xs, spec)
    return 0.5 * (G + G.T)


def coherent_kernel(x, x2, scale: float = 1.0) -> float:
    """Squared overlap of product coherent states: exp(-scale * ||x - x2||^2)."""
    d = np.asarray(x, float) - np.asarray(x2, float)
    return float(np.exp(-scale * d @ d))


def rbf_kernel(bandwidth: float = 1.0):
    """Classical Gaussian kernel exp(-||x-x'||^2 / (2 bandwidth^2))."""
    if bandwidth <= 0:
        raise InvalidArgument("bandwidth must be positive")

    def k(x, x2):
        d = np.asarray(x, float) - np.asarray(x2, float)
        return float(np.exp(-(d @ d) / (2.0 * bandwidth**2)))

    return k


class QuantumKernel:
    """Callable kernel bound to an encoding, with a vectorized ``matrix``."""

    def __init__(self, spec: EncodingSpec):
        self.spec = spec

    def __call__(self, x, x2) -> float:
        return kernel_value(x, x2, self.spec)

    def matrix(self, xs, zs) -> np.ndarray:
        return cross_gram(xs, zs, self.spec)

    def __repr__(self):
        return f"QuantumKernel({self.spec.kind!r}, {self.spec.num_features})"


def make_kernel(name: str, num_features: int | None = None, bandwidth: float = 1.0):
    """Kernel handle by name: ``amplitude``, ``angle``, ``basis`` or ``rbf``."""
    if name == "rbf":
        return rbf_kernel(bandwidth)
    if num_features is None:
        raise InvalidArgument(f"kernel {name!r} needs num_features")
    return QuantumKernel(EncodingSpec(name, num_features))


# ---------------------------------------------------------------------------
# Kernel ridge regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelModel:
    support_inputs: np.ndarray
    coefficients: np.ndarray
    encoding: EncodingSpec
    ridge: float = 0.0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.support_inputs, dtype=float))
        a = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if X.shape[0] != a.size:
            raise InvalidArgument("one coefficient per support input required")
        if self.ridge < 0:
            raise InvalidArgument("ridge must be >= 0")
        object.__setattr__(self, "support_inputs", X)
        object.__setattr__(self, "coefficients", a)

    def to_dict(self) -> dict:
        return {
            "encoding": self.encoding.to_dict(),
            "ridge": float(self.ridge),
            "support_inputs": self.support_inputs.tolist(),
            "coefficients": self.coefficients.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelModel":
        return cls(
            np.array(d["support_inputs"], dtype=float),
            np.array(d["coefficients"], dtype=float),
            EncodingSpec(**d["encoding"]),
            float(d["ridge"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "KernelModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def krr_fit(xs, ys, spec: EncodingSpec, gamma: float) -> KernelModel:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float).reshape(-1)
    M = xs.shape[0]
    if M < 1 or ys.size != M:
        raise InvalidArgument("need M >= 1 inputs and one label per input")
    if gamma < 0:
        raise InvalidArgument("gamma must be >= 0")
    A = gram_matrix(xs, spec) + gamma * M * np.eye(M)
    if gamma == 0 and 1.0 / np.linalg.cond(A) < SINGULAR_RCOND:
        raise SingularMatrixError("Gram matrix is singular and gamma = 0")
    try:
        alpha = np.linalg.solve(A, ys)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    return KernelModel(xs, alpha, spec, gamma)


def krr_predict(model: KernelModel, x) -> float:
    """f(x) = sum_m alpha_m k(x_m, x)."""
    k = cross_gram(model.support_inputs, np.atleast_2d(np.asarray(x, float)), model.encoding)
    return float(model.coefficients @ k[:, 0])


def krr_predict_many(model: KernelModel, xs) -> np.ndarray:
    return model.coefficients @ cross_gram(model.support_inputs, xs, model.encoding)


def regularized_risk(alpha, K, y, gamma) -> float:
    """(1/M)||y - K alpha||^2 + gamma * alpha^T K alpha."""
    r = y - K @ alpha
    return float(r @ r / len(y) + gamma * alpha @ K @ alpha)


# ---------------------------------------------------------------------------
# Measurement expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasurementExpansion:
    """M = sum_k weights[k] * rho(anchors[k])."""

    anchors: np.ndarray
    weights: np.ndarray
    encoding: EncodingSpec

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if X.shape[0] != w.size:
            raise InvalidArgument("one weight per anchor required")
        object.__setattr__(self, "anchors", X)
        object.__setattr__(self, "weights", w)


def fit_measurement(xs, ys, spec: EncodingSpec) -> MeasurementExpansion:
    """Least-squares optimal measurement over vectorized feature matrices.

    With R the matrix whose columns are vec(rho(x_m)), the optimal vectorized
    operator (R R^dagger)^+ R y equals R K^+ y, so the weights are K^+ y where the
    pseudo-inverse drops singular values below 1e-10 * sigma_max.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if xs.shape[0] < 1 or ys.size != xs.shape[0]:
        raise InvalidArgument("need M >= 1 inputs and one label per input")
    K = gram_matrix(xs, spec)
    w = np.linalg.pinv(K, rcond=PINV_RCOND, hermitian=True) @ ys
    return MeasurementExpansion(xs, w, spec)


def measurement_operator(exp: MeasurementExpansion) -> np.ndarray:
    A = encoded_amplitudes(exp.anchors, exp.encoding)
    return np.einsum("k,ki,kj->ij", exp.weights, A, A.conj())


def measurement_predict(exp: MeasurementExpansion, x) -> float:
    """Kernel form sum_k gamma_k k(x_k, x)."""
    k = cross_gram(exp.anchors, np.atleast_2d(np.asarray(x, float)), exp.encoding)
    return float(exp.weights @ k[:, 0])


def measurement_expectation(exp: MeasurementExpansion, x) -> float:
    """Operator form tr(rho(x) M)."""
    rho = feature_density(x, exp.encoding).entries
    return float(np.real(np.einsum("ij,ji->", rho, measurement_operator(exp))))
