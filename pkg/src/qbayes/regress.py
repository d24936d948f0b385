"""Linear regression through the pseudo-inverse and Gaussian-process prediction.

Both predictors reduce to inner products; they are evaluated here with exact
dense linear algebra.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .errors import IllConditionedError, InvalidArgument, NumericalError

SVD_RCOND = 1e-10
JITTER_START = 1e-12
JITTER_MAX = 1e-6
VARIANCE_FLOOR = -1e-9


@dataclass(frozen=True, eq=False)
class SvdRegression:
    """Truncated SVD X = U diag(s) V^T with the fitted coefficients."""

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    coefficients: np.ndarray
    projected_targets: np.ndarray  # U^T y, one entry per kept singular value

    @property
    def rank(self) -> int:
        return self.singular_values.size

    @property
    def num_features(self) -> int:
        return self.right_vectors.shape[0]


def pinv_fit(X, y) -> SvdRegression:
    """beta = sum_k v_k (u_k^T y) / s_k over singular values above 1e-10 * s_max."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] < 1:
        raise InvalidArgument("X needs at least one row")
    if y.size != X.shape[0]:
        raise InvalidArgument(f"X has {X.shape[0]} rows but y has {y.size} entries")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    keep = s > SVD_RCOND * s[0] if s.size and s[0] > 0 else np.zeros(s.size, bool)
    U, s, V = U[:, keep], s[keep], Vt[keep].T
    uty = U.T @ y
    beta = V @ (uty / s) if s.size else np.zeros(X.shape[1])
    return SvdRegression(s, U, V, beta, uty)


def pinv_predict(model: SvdRegression, x) -> float:
    """y_hat(x) = sum_k x^T v_k (u_k^T y) / s_k, cross-checked against x^T beta."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.num_features:
        raise InvalidArgument(f"expected {model.num_features} features, got {x.size}")
    inner = float(np.sum((x @ model.right_vectors) * model.projected_targets / model.singular_values))
    direct = float(x @ model.coefficients)
    if abs(inner - direct) > 1e-10 * max(1.0, abs(direct)):
        raise NumericalError(f"prediction forms disagree: {inner} vs {direct}")
    return direct


# ---------------------------------------------------------------------------
# Gaussian process
# ---------------------------------------------------------------------------


def kernel_matrix(kernel: Callable, A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if hasattr(kernel, "matrix"):
        return np.asarray(kernel.matrix(A, B), dtype=float)
    return np.array([[kernel(a, b) for b in B] for a in A], dtype=float)


@dataclass(frozen=True, eq=False)
class GpModel:
    train_inputs: np.ndarray
    train_targets: np.ndarray
    kernel: Callable
    noise: float
    weights: np.ndarray
    cholesky: np.ndarray = field(repr=False)
    jitter: float = 0.0


def gp_fit(inputs, y, kernel: Callable, noise: float) -> GpModel:
    """Factor K + noise*I (escalating jitter 1e-12 .. 1e-6) and cache the weights."""
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] < 1 or y.size != X.shape[0]:
        raise InvalidArgument("need n >= 1 inputs and one target per input")
    if noise < 0:
        raise InvalidArgument("noise variance must be >= 0")
    K = kernel_matrix(kernel, X, X)
    A = 0.5 * (K + K.T) + noise * np.eye(X.shape[0])
    jitter = 0.0
    while True:
        try:
            L = np.linalg.cholesky(A + jitter * np.eye(A.shape[0]))
            break
        except np.linalg.LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_MAX * 1.0001:
                raise IllConditionedError(
                    f"K + noise*I not positive definite even with jitter {JITTER_MAX}"
                ) from None
    weights = _cho_solve(L, y)
    return GpModel(X, y, kernel, float(noise), weights, L, jitter)


def _cho_solve(L, b):
    z = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, z, lower=False)


def gp_predict(model: GpModel, x_star) -> tuple[float, float]:
    """Mean k*^T (K + s2 I)^-1 y and variance k** - k*^T (K + s2 I)^-1 k*."""
    x_star = np.atleast_2d(np.asarray(x_star, dtype=float))
    k_star = kernel_matrix(model.kernel, model.train_inputs, x_star)[:, 0]
    k_ss = float(kernel_matrix(model.kernel, x_star, x_star)[0, 0])
    mean = float(k_star @ model.weights)
    var = k_ss - float(k_star @ _cho_solve(model.cholesky, k_star))
    if var < VARIANCE_FLOOR:
        raise NumericalError(f"negative predictive variance {var}")
    return mean, max(var, 0.0)
