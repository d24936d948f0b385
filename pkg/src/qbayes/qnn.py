"""Variational quantum classifier with a single readout qubit.

The model acts on ``n`` data qubits plus a readout qubit (index ``n``). An
input z in {-1, +1}^n is loaded as the basis state |z, 1> (data qubit j is
|1> iff z_j = +1, readout |1>), the layers

    U(theta) = U_L(theta_L) ... U_1(theta_1),   U_k = exp(i theta_k Sigma_k)

are applied, and the classifier output is <Y_readout>. Training minimizes
loss = 1 - l(z) <z,1| U^dag Y U |z,1>.

Differentiating U_k brings down i*Sigma_k, so with

    W_k = U_1^dag ... U_L^dag Y U_L ... U_{k+1} Sigma_k U_k ... U_1

the output gradient is d<Y>/d theta_k = -2 Im <z,1|W_k|z,1> and therefore
d loss / d theta_k = 2 l(z) Im <z,1|W_k|z,1>.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .core import Circuit, CircuitOp, PauliString, apply_matrix, _STANDARD
from .errors import InvalidArgument

GRAD_MODES = ("analytic", "hadamard_shots", "finite_diff")


@dataclass(frozen=True, eq=False)
class QnnModel:
    data_qubits: int
    generators: tuple[PauliString, ...]
    theta: np.ndarray = None

    def __post_init__(self):
        n = int(self.data_qubits)
        if n < 1:
            raise InvalidArgument("need at least one data qubit")
        gens = tuple(g if isinstance(g, PauliString) else PauliString(g) for g in self.generators)
        for g in gens:
            if g.num_qubits != n + 1:
                raise InvalidArgument(f"generator {g} must act on {n + 1} qubits")
            if g.letters[n] == "I" or len(g.support) > 2:
                raise InvalidArgument(
                    f"generator {g} must touch the readout qubit and at most one data qubit"
                )
        theta = np.zeros(len(gens)) if self.theta is None else np.array(self.theta, dtype=float)
        theta = theta.reshape(-1)
        if theta.size != len(gens):
            raise InvalidArgument(f"{len(gens)} layers but {theta.size} parameters")
        if not np.all(np.isfinite(theta)):
            raise InvalidArgument("parameters must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "data_qubits", n)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "theta", theta)

    @property
    def readout(self) -> int:
        return self.data_qubits

    @property
    def num_qubits(self) -> int:
        return self.data_qubits + 1

    @property
    def num_params(self) -> int:
        return len(self.generators)

    @property
    def observable(self) -> PauliString:
        return PauliString.from_sparse(self.num_qubits, {self.readout: "Y"})

    def with_theta(self, theta) -> "QnnModel":
        return replace(self, theta=np.asarray(theta, dtype=float))

    def append_layer(self, generator: PauliString | str, theta: float = 0.0) -> "QnnModel":
        return QnnModel(
            self.data_qubits, self.generators + (PauliString(str(generator)),), np.append(self.theta, theta)
        )

    def to_circuit(self) -> Circuit:
        """Equivalent :class:`Circuit`; layer k uses parameter slot k."""
        ops = []
        for k, g in enumerate(self.generators):
            sup = g.support
            ops.append(CircuitOp("".join(g.letters[q] for q in sup), sup, k))
        return Circuit(self.num_qubits, tuple(ops), self.num_params)

    def to_dict(self) -> dict:
        return {
            "data_qubits": self.data_qubits,
            "generators": [g.letters for g in self.generators],
            "theta": self.theta.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QnnModel":
        return cls(int(d["data_qubits"]), tuple(PauliString(g) for g in d["generators"]), d["theta"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "QnnModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sweep(data_qubits: int, word: str) -> tuple[PauliString, ...]:
    """Generators ``word[0]`` on data qubit j times ``word[1]`` on the readout, j = 0..n-1."""
    word = word.upper()
    if len(word) != 2 or any(c not in "XYZ" for c in word):
        raise InvalidArgument(f"sweep word must be two Pauli letters, got {word!r}")
    n = data_qubits
    return tuple(PauliString.from_sparse(n + 1, {j: word[0], n: word[1]}) for j in range(n))


DEFAULT_SWEEPS = ("XX", "ZX")


def layered_model(data_qubits: int, sweeps: Sequence[str] = DEFAULT_SWEEPS, theta=None) -> QnnModel:
    """One sweep of two-qubit generators per entry of ``sweeps``.

    The default ends with a ``ZX`` sweep: circuits made only of XX/ZZ-type
    generators commute with the parity Z_r prod_j Z_j while Y_r anticommutes
    with it, so their <Y_r> is identically zero on basis inputs.
    """
    gens: tuple[PauliString, ...] = ()
    for word in sweeps:
        gens += sweep(data_qubits, word)
    return QnnModel(data_qubits, gens, theta)


# ---------------------------------------------------------------------------
# Forward pass and gradients
# ---------------------------------------------------------------------------


def _input_index(model: QnnModel, z) -> int:
    z = np.asarray(z).reshape(-1)
    if z.size != model.data_qubits:
        raise InvalidArgument(f"expected {model.data_qubits} inputs, got {z.size}")
    if not np.all((z == 1) | (z == -1)):
        raise InvalidArgument(f"inputs must be +1 or -1, got {z}")
    idx = 1 << model.readout
    for j, v in enumerate(z):
        if v == 1:
            idx |= 1 << j
    return idx


def _check_label(label) -> int:
    if label not in (1, -1):
        raise InvalidArgument(f"label must be +1 or -1, got {label!r}")
    return int(label)


def input_state(model: QnnModel, z) -> np.ndarray:
    """Amplitudes of |z, 1>."""
    vec = np.zeros(2**model.num_qubits, dtype=complex)
    vec[_input_index(model, z)] = 1.0
    return vec


def _layer_masks(model: QnnModel):
    return [g.masks() for g in model.generators]


def _run_layers(vec, masks, theta, sign=1.0, order=None):
    order = range(len(masks)) if order is None else order
    for k in order:
        _kernels.exp_pauli_inplace(vec, math.cos(theta[k]), sign * math.sin(theta[k]), *masks[k])
    return vec


def output_state(model: QnnModel, z) -> np.ndarray:
    """U(theta)|z, 1>."""
    return _run_layers(input_state(model, z), _layer_masks(model), model.theta)


def qnn_forward(model: QnnModel, z) -> float:
    """<z,1| U^dag Y_readout U |z,1>."""
    psi = output_state(model, z)
    return _kernels.pauli_cross(psi, psi, *model.observable.masks()).real


def qnn_loss(model: QnnModel, z, label) -> float:
    label = _check_label(label)
    return 1.0 - label * qnn_forward(model, z)


def gradient_overlaps(model: QnnModel, z) -> tuple[float, np.ndarray]:
    """Forward value and <z,1|W_k|z,1> for every layer (adjoint sweep).

    Runs U forward once, then walks back through the layers carrying
    psi_k = U_k..U_1|z,1> and lam_k = U_{k+1}^dag..U_L^dag Y U|z,1>, so
    <z,1|W_k|z,1> = <lam_k|Sigma_k|psi_k>.
    """
    masks = _layer_masks(model)
    theta = model.theta
    psi = _run_layers(input_state(model, z), masks, theta)
    lam = _kernels.pauli_apply(psi, *model.observable.masks())
    forward = float(np.vdot(psi, lam).real)
    overlaps = np.empty(len(masks), dtype=complex)
    for k in reversed(range(len(masks))):
        overlaps[k] = _kernels.pauli_cross(lam, psi, *masks[k])
        c, s = math.cos(theta[k]), -math.sin(theta[k])
        _kernels.exp_pauli_inplace(psi, c, s, *masks[k])
        _kernels.exp_pauli_inplace(lam, c, s, *masks[k])
    return forward, overlaps


def qnn_grad_analytic(model: QnnModel, z, label) -> np.ndarray:
    """d loss / d theta_k = 2 l(z) Im <z,1|W_k|z,1>."""
    label = _check_label(label)
    _, overlaps = gradient_overlaps(model, z)
    return 2.0 * label * overlaps.imag


def loss_and_grad(model: QnnModel, z, label) -> tuple[float, float, np.ndarray]:
    """(forward, loss, gradient) from one adjoint sweep."""
    label = _check_label(label)
    forward, overlaps = gradient_overlaps(model, z)
    return forward, 1.0 - label * forward, 2.0 * label * overlaps.imag


def qnn_grad_fd(model: QnnModel, z, label, epsilon: float) -> np.ndarray:
    """Central differences (loss(theta + eps e_k) - loss(theta - eps e_k)) / (2 eps)."""
    label = _check_label(label)
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be > 0")
    grad = np.empty(model.num_params)
    for k in range(model.num_params):
        tp = model.theta.copy()
        tm = model.theta.copy()
        tp[k] += epsilon
        tm[k] -= epsilon
        grad[k] = (qnn_loss(model.with_theta(tp), z, label) - qnn_loss(model.with_theta(tm), z, label)) / (
            2.0 * epsilon
        )
    return grad


# ---------------------------------------------------------------------------
# Hadamard test
# ---------------------------------------------------------------------------


def apply_gradient_operator(model: QnnModel, k: int, vec: np.ndarray) -> np.ndarray:
    """W_k vec, built literally from its 2L+2 factors."""
    if not 0 <= k < model.num_params:
        raise InvalidArgument(f"layer index {k} outside [0, {model.num_params})")
    masks = _layer_masks(model)
    theta = model.theta
    out = np.array(vec, dtype=complex)
    _run_layers(out, masks, theta, order=range(k + 1))
    out = _kernels.pauli_apply(out, *masks[k])
    _run_layers(out, masks, theta, order=range(k + 1, len(masks)))
    out = _kernels.pauli_apply(out, *model.observable.masks())
    return _run_layers(out, masks, theta, sign=-1.0, order=reversed(range(len(masks))))


def hadamard_test_state(psi: np.ndarray, unitary) -> np.ndarray:
    """Final state of the auxiliary-qubit protocol for Im <psi|W|psi>.

    The auxiliary qubit is the most significant one. Starting from
    |psi> (|0> + |1>)/sqrt(2), i*W is applied on the auxiliary-1 branch and
    a Hadamard is applied to the auxiliary qubit.
    ``unitary`` is a matrix or a callable returning ``W @ v``.
    """
    psi = np.asarray(psi, dtype=complex)
    w_psi = unitary(psi) if callable(unitary) else np.asarray(unitary) @ psi
    joint = np.concatenate([psi, 1j * w_psi]) / math.sqrt(2.0)
    n = int(round(math.log2(joint.size)))
    return apply_matrix(joint, n, _STANDARD["H"], (n - 1,))


def hadamard_test_p0(psi: np.ndarray, unitary) -> float:
    """Exact probability of reading 0 on the auxiliary qubit: 1/2 - Im<psi|W|psi>/2."""
    final = hadamard_test_state(psi, unitary)
    half = final.size // 2
    return float(np.sum(np.abs(final[:half]) ** 2))


def hadamard_test_im_estimate(p0: float, shots: int, rng: np.random.Generator) -> float:
    """Shot estimate of Im<psi|W|psi> = 1 - 2 P(0) from ``shots`` auxiliary readouts."""
    if int(shots) < 1:
        raise InvalidArgument("shots must be >= 1")
    zeros = rng.binomial(int(shots), min(max(p0, 0.0), 1.0))
    return 1.0 - 2.0 * zeros / int(shots)


def hadamard_test_grad(model: QnnModel, z, label, k: int, shots: int, seed: int) -> float:
    """Shot-based estimate of d loss / d theta_k through the Hadamard test."""
    label = _check_label(label)
    psi = input_state(model, z)
    p0 = hadamard_test_p0(psi, lambda v: apply_gradient_operator(model, k, v))
    im = hadamard_test_im_estimate(p0, shots, np.random.default_rng(seed))
    return 2.0 * label * im


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 10
    batch: int = 1
    grad_mode: str = "analytic"
    shots: int = 1000
    epsilon: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise InvalidArgument("learning_rate must be >= 0")
        if int(self.epochs) < 0:
            raise InvalidArgument("epochs must be >= 0")
        if int(self.batch) < 1:
            raise InvalidArgument("batch must be >= 1")
        if self.grad_mode not in GRAD_MODES:
            raise InvalidArgument(f"grad_mode must be one of {GRAD_MODES}")
        if int(self.shots) < 1:
            raise InvalidArgument("shots must be >= 1")
        if not self.epsilon > 0:
            raise InvalidArgument("epsilon must be > 0")


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    accuracy: float


def predict(model: QnnModel, z) -> int:
    """Sign of the forward value; ties go to +1."""
    return 1 if qnn_forward(model, z) >= 0 else -1


def accuracy(model: QnnModel, data: Iterable[tuple[Sequence[int], int]]) -> float:
    data = list(data)
    if not data:
        raise InvalidArgument("accuracy of an empty dataset is undefined")
    return sum(predict(model, z) == label for z, label in data) / len(data)


def _example_grad(model, z, label, cfg: TrainConfig, rng) -> tuple[float, float, np.ndarray]:
    if cfg.grad_mode == "analytic":
        return loss_and_grad(model, z, label)
    forward = qnn_forward(model, z)
    loss = 1.0 - label * forward
    if cfg.grad_mode == "finite_diff":
        return forward, loss, qnn_grad_fd(model, z, label, cfg.epsilon)
    seeds = rng.integers(0, 2**63, size=model.num_params)
    grad = np.array(
        [hadamard_test_grad(model, z, label, k, cfg.shots, int(seeds[k])) for k in range(model.num_params)]
    )
    return forward, loss, grad


def train_sgd(
    model: QnnModel,
    data: Sequence[tuple[Sequence[int], int]],
    cfg: TrainConfig,
    on_epoch: Callable[[EpochStats], None] | None = None,
) -> tuple[QnnModel, list[float]]:
    """Mini-batch SGD, theta <- theta - lr * mean batch gradient.

    Examples are reshuffled every epoch with ``cfg.seed``. The loss history
    holds, per epoch, the mean loss of each example evaluated at the
    parameters in force when its batch was processed; ``on_epoch`` also gets
    the matching running accuracy.
    """
    data = [(np.asarray(z), _check_label(label)) for z, label in data]
    if not data:
        raise InvalidArgument("training data is empty")
    for z, _ in data:
        _input_index(model, z)
    rng = np.random.default_rng(cfg.seed)
    theta = model.theta.copy()
    history: list[float] = []
    for epoch in range(1, int(cfg.epochs) + 1):
        order = rng.permutation(len(data))
        losses, hits = [], 0
        for start in range(0, len(order), int(cfg.batch)):
            batch = order[start : start + int(cfg.batch)]
            current = model.with_theta(theta)
            grad = np.zeros_like(theta)
            for i in batch:
                z, label = data[i]
                forward, loss, g = _example_grad(current, z, label, cfg, rng)
                losses.append(loss)
                hits += (1 if forward >= 0 else -1) == label
                grad += g
            theta = theta - cfg.learning_rate * grad / len(batch)
        stats = EpochStats(epoch, float(np.mean(losses)), hits / len(data))
        history.append(stats.mean_loss)
        if on_epoch is not None:
            on_epoch(stats)
    return model.with_theta(theta), history


def write_training_log(path, stats: Iterable[EpochStats]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_loss", "accuracy"])
        for s in stats:
            w.writerow([s.epoch, repr(s.mean_loss), repr(s.accuracy)])
