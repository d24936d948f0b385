"""Dense statevector / density-matrix simulation.

Bit order is little-endian throughout: qubit ``k`` is bit ``k`` of the basis
index, so ``|x_0 x_1 ... x_{n-1}>`` sits at ``sum_k 2**k * x_k``. Multi-qubit
gate matrices follow the same rule over their target list (``targets[0]`` is
the least-significant bit of the gate's local index), which makes a gate on
targets ``(0, ..., n-1)`` identical to the full-register matrix.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import InvalidArgument, UnsupportedSizeError

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9

#: Largest register the dense simulator will allocate.
MAX_QUBITS = 24

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
)  # control = targets[0] (low bit), target = targets[1]
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
_STANDARD = {
    "X": _PAULI["X"],
    "NOT": _PAULI["X"],
    "Y": _PAULI["Y"],
    "Z": _PAULI["Z"],
    "H": _H,
    "CNOT": _CNOT,
    "CX": _CNOT,
    "CZ": _CZ,
    "SWAP": _SWAP,
}


def _check_qubits(num_qubits) -> int:
    if not isinstance(num_qubits, (int, np.integer)) or num_qubits < 1:
        raise InvalidArgument(f"num_qubits must be a positive integer, got {num_qubits!r}")
    if num_qubits > MAX_QUBITS:
        raise UnsupportedSizeError(
            f"{num_qubits} qubits exceeds the dense cap of {MAX_QUBITS}"
        )
    return int(num_qubits)


def _finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgument(f"{what} must be finite, got {value}")
    return value


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state of ``num_qubits`` qubits; amplitudes are read-only."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        n = _check_qubits(self.num_qubits)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**n:
            raise InvalidArgument(
                f"expected {2**n} amplitudes for {n} qubits, got {amps.size}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidArgument(f"state is not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "num_qubits", n)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_array(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(round(math.log2(amps.size))) if amps.size else 0
        if amps.size == 0 or 2**n != amps.size:
            raise InvalidArgument(f"length {amps.size} is not a power of two")
        return cls(n, amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __array__(self, dtype=None, copy=None):
        return np.array(self.amplitudes, dtype=dtype)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    num_qubits: int
    entries: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        n = _check_qubits(self.num_qubits)
        rho = np.array(self.entries, dtype=complex)
        d = 2**n
        if rho.shape != (d, d):
            raise InvalidArgument(f"expected a {d}x{d} matrix, got {rho.shape}")
        if self.validate:
            if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
                raise InvalidArgument("density matrix is not Hermitian")
            tr = np.trace(rho)
            if abs(tr - 1.0) > HERMITIAN_TOL:
                raise InvalidArgument(f"density matrix has trace {tr}")
            if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
                raise InvalidArgument("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "num_qubits", n)
        object.__setattr__(self, "entries", rho)

    def purity(self) -> float:
        """tr(rho^2)."""
        return float(np.real(np.einsum("ij,ji->", self.entries, self.entries)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))


@dataclass(frozen=True)
class PauliString:
    """Tensor product of I/X/Y/Z; ``letters[k]`` acts on qubit ``k``."""

    letters: str

    def __post_init__(self):
        letters = str(self.letters).upper()
        if not letters or any(c not in "IXYZ" for c in letters):
            raise InvalidArgument(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def from_sparse(cls, num_qubits: int, ops: Mapping[int, str]) -> "PauliString":
        """``PauliString.from_sparse(3, {0: "X", 2: "Z"})`` -> ``XIZ``."""
        letters = ["I"] * num_qubits
        for q, p in ops.items():
            if not 0 <= q < num_qubits:
                raise InvalidArgument(f"qubit {q} out of range for {num_qubits} qubits")
            letters[q] = p
        return cls("".join(letters))

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, c in enumerate(self.letters) if c != "I")

    @property
    def flip_mask(self) -> int:
        return sum(1 << k for k, c in enumerate(self.letters) if c in "XY")

    @property
    def z_mask(self) -> int:
        return sum(1 << k for k, c in enumerate(self.letters) if c in "YZ")

    @property
    def phase(self) -> complex:
        return 1j ** self.letters.count("Y")

    def masks(self) -> tuple[int, int, complex]:
        return self.flip_mask, self.z_mask, self.phase

    def matrix(self) -> np.ndarray:
        # kron's first factor is the most significant bit -> reverse letters
        return reduce(np.kron, [_PAULI[c] for c in reversed(self.letters)])

    def local_matrix(self) -> np.ndarray:
        """Matrix restricted to :attr:`support` (little-endian over support)."""
        sup = self.support
        if not sup:
            return np.eye(2, dtype=complex)
        return reduce(np.kron, [_PAULI[self.letters[q]] for q in reversed(sup)])

    def commutes_with(self, other: "PauliString") -> bool:
        anti = sum(
            1 for a, b in zip(self.letters, other.letters) if a != "I" and b != "I" and a != b
        )
        return anti % 2 == 0

    def __str__(self) -> str:
        return self.letters


@dataclass(frozen=True, eq=False)
class GateOp:
    name: str
    targets: tuple[int, ...]
    matrix: np.ndarray
    parameter: float | None = None

    def __post_init__(self):
        targets = tuple(int(t) for t in self.targets)
        if not targets or len(set(targets)) != len(targets) or min(targets) < 0:
            raise InvalidArgument(f"invalid gate targets {self.targets!r}")
        m = np.array(self.matrix, dtype=complex)
        d = 2 ** len(targets)
        if m.shape != (d, d):
            raise InvalidArgument(
                f"gate {self.name} on {len(targets)} qubits needs a {d}x{d} matrix"
            )
        if np.max(np.abs(m @ m.conj().T - np.eye(d))) > UNITARY_TOL:
            raise InvalidArgument(f"gate {self.name} is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "matrix", m)

    @property
    def arity(self) -> int:
        return len(self.targets)

    def dagger(self) -> "GateOp":
        return GateOp(self.name + "^dag", self.targets, self.matrix.conj().T, self.parameter)


# ---------------------------------------------------------------------------
# Gate constructors
# ---------------------------------------------------------------------------

_ARITY = {"X": 1, "NOT": 1, "Y": 1, "Z": 1, "H": 1, "CNOT": 2, "CX": 2, "CZ": 2, "SWAP": 2}


def standard_gate(name: str, targets: Sequence[int] | int) -> GateOp:
    """Fixed gate by name. ``NOT`` is the bit flip (same matrix as ``X``)."""
    key = str(name).upper()
    if key not in _STANDARD:
        raise InvalidArgument(f"unknown gate {name!r}")
    targets = (targets,) if isinstance(targets, (int, np.integer)) else tuple(targets)
    if len(targets) != _ARITY[key]:
        raise InvalidArgument(f"gate {key} takes {_ARITY[key]} target(s), got {len(targets)}")
    return GateOp(key, targets, _STANDARD[key])


def rotation_gate(axis: str, angle: float, target: int) -> GateOp:
    """R_axis(angle) = exp(-i * angle * sigma_axis / 2)."""
    phi = _finite(angle, "rotation angle")
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    ax = str(axis).lower()
    if ax == "x":
        m = np.array([[c, -1j * s], [-1j * s, c]])
    elif ax == "y":
        m = np.array([[c, -s], [s, c]], dtype=complex)
    elif ax == "z":
        m = np.diag([complex(c, -s), complex(c, s)])
    else:
        raise InvalidArgument(f"rotation axis must be x, y or z, got {axis!r}")
    return GateOp("R" + ax.upper(), (target,), m, phi)


def controlled_phase(angle: float, control: int, target: int) -> GateOp:
    phi = _finite(angle, "phase angle")
    return GateOp("CPHASE", (control, target), np.diag([1, 1, 1, np.exp(1j * phi)]), phi)


def exp_pauli(theta: float, sigma: PauliString) -> GateOp:
    """exp(i*theta*sigma) = cos(theta) I + i sin(theta) sigma, on sigma's support."""
    th = _finite(theta, "theta")
    sup = sigma.support or (0,)
    m = math.cos(th) * np.eye(2 ** len(sup)) + 1j * math.sin(th) * sigma.local_matrix()
    return GateOp("EXP_" + sigma.letters, sup, m, th)


def pauli_gate(sigma: PauliString) -> GateOp:
    sup = sigma.support or (0,)
    return GateOp(sigma.letters, sup, sigma.local_matrix())


# ---------------------------------------------------------------------------
# States and application
# ---------------------------------------------------------------------------


def basis_index(bits: Sequence[int]) -> int:
    return sum(int(b) << k for k, b in enumerate(bits))


def init_basis_state(num_qubits: int, bits: Sequence[int]) -> StateVector:
    n = _check_qubits(num_qubits)
    bits = list(bits)
    if len(bits) != n:
        raise InvalidArgument(f"expected {n} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise InvalidArgument(f"bits must be 0 or 1, got {bits}")
    amps = np.zeros(2**n, dtype=complex)
    amps[basis_index(bits)] = 1.0
    return StateVector(n, amps)


def zero_state(num_qubits: int) -> StateVector:
    return init_basis_state(num_qubits, [0] * num_qubits)


def apply_matrix(vec: np.ndarray, num_qubits: int, matrix: np.ndarray, targets) -> np.ndarray:
    """Apply a k-qubit matrix to a raw amplitude array; returns a new array."""
    n = num_qubits
    k = len(targets)
    psi = np.asarray(vec, dtype=complex).reshape([2] * n)
    gate = np.asarray(matrix).reshape([2] * (2 * k))
    # tensor axis a <-> qubit n-1-a ; gate input axis k+i <-> targets[k-1-i]
    psi_axes = [n - 1 - targets[k - 1 - i] for i in range(k)]
    out = np.tensordot(gate, psi, axes=(list(range(k, 2 * k)), psi_axes))
    out = np.moveaxis(out, list(range(k)), psi_axes)
    return out.reshape(-1)


def apply(state: StateVector, gate: GateOp) -> StateVector:
    if max(gate.targets) >= state.num_qubits:
        raise InvalidArgument(
            f"gate {gate.name} targets {gate.targets} outside {state.num_qubits} qubits"
        )
    return StateVector(
        state.num_qubits, apply_matrix(state.amplitudes, state.num_qubits, gate.matrix, gate.targets)
    )


def apply_pauli_vector(vec: np.ndarray, sigma: PauliString) -> np.ndarray:
    """sigma @ vec without building the 2^n x 2^n matrix."""
    vec = np.ascontiguousarray(vec, dtype=complex)
    if vec.size != 2**sigma.num_qubits:
        raise InvalidArgument("Pauli string and vector sizes differ")
    return _kernels.pauli_apply(vec, *sigma.masks())


def expectation(state: StateVector, obs: PauliString) -> float:
    """<psi|obs|psi>."""
    if obs.num_qubits != state.num_qubits:
        raise InvalidArgument(
            f"observable on {obs.num_qubits} qubits, state has {state.num_qubits}"
        )
    amps = np.ascontiguousarray(state.amplitudes)
    return _kernels.pauli_cross(amps, amps, *obs.masks()).real


# ---------------------------------------------------------------------------
# Density matrices and measurement
# ---------------------------------------------------------------------------


def to_density(state: StateVector) -> DensityMatrix:
    a = state.amplitudes
    return DensityMatrix(state.num_qubits, np.outer(a, a.conj()))


def mix_ensemble(states: Sequence[StateVector], probs) -> DensityMatrix:
    probs = np.asarray(probs, dtype=float).reshape(-1)
    if len(states) == 0 or len(states) != probs.size:
        raise InvalidArgument("need one probability per state")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-10:
        raise InvalidArgument(f"probabilities must be nonnegative and sum to 1, got {probs}")
    n = states[0].num_qubits
    if any(s.num_qubits != n for s in states):
        raise InvalidArgument("all ensemble states need the same qubit count")
    amps = np.stack([s.amplitudes for s in states])
    rho = np.einsum("k,ki,kj->ij", probs, amps, amps.conj())
    return DensityMatrix(n, rho)


def born_pmf(rho: DensityMatrix) -> np.ndarray:
    """p(y) = tr(rho Q_y) for computational-basis projectors Q_y."""
    return np.real(np.diag(rho.entries)).copy()


def measure_shots(state: StateVector, shots: int, seed: int) -> np.ndarray:
    """Counts per basis outcome, length 2**n, from ``shots`` i.i.d. draws."""
    if int(shots) < 1:
        raise InvalidArgument(f"shots must be >= 1, got {shots}")
    p = state.probabilities()
    p = p / p.sum()
    return np.random.default_rng(seed).multinomial(int(shots), p)


# ---------------------------------------------------------------------------
# Circuits
# ---------------------------------------------------------------------------

_PARAM_GATES = {"RX": 1, "RY": 1, "RZ": 1, "CPHASE": 2}
_WORD = re.compile(r"^[IXYZ]+$")


@dataclass(frozen=True)
class CircuitOp:
    """One circuit line: a gate name, its targets, and an optional parameter slot.

    With a slot, ``RX/RY/RZ/CPHASE`` take ``theta[slot]`` as their angle and a
    Pauli word such as ``XZ`` becomes ``exp(i*theta[slot]*X(t0)Z(t1))``.
    Without a slot a Pauli word is applied as the plain Pauli product.
    """

    name: str
    targets: tuple[int, ...]
    slot: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "name", self.name.upper())
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        name, k = self.name, len(self.targets)
        if name in _PARAM_GATES:
            if self.slot is None:
                raise InvalidArgument(f"{name} needs a parameter slot")
            if k != _PARAM_GATES[name]:
                raise InvalidArgument(f"{name} takes {_PARAM_GATES[name]} target(s)")
        elif _WORD.match(name) and name not in _STANDARD:
            if len(name) != k:
                raise InvalidArgument(f"Pauli word {name} needs {len(name)} targets")
        elif name in _STANDARD:
            if k != _ARITY[name]:
                raise InvalidArgument(f"{name} takes {_ARITY[name]} target(s)")
            if self.slot is not None and not _WORD.match(name):
                raise InvalidArgument(f"{name} takes no parameter")
        else:
            raise InvalidArgument(f"unknown gate {self.name!r}")

    @property
    def pauli_word(self) -> bool:
        return bool(_WORD.match(self.name))

    def bind(self, num_qubits: int, theta: Sequence[float]) -> GateOp:
        name = self.name
        if self.slot is None:
            if name in _STANDARD:
                return standard_gate(name, self.targets)
            return pauli_gate(self._word(num_qubits))
        angle = theta[self.slot]
        if name in ("RX", "RY", "RZ"):
            return rotation_gate(name[1], angle, self.targets[0])
        if name == "CPHASE":
            return controlled_phase(angle, *self.targets)
        return exp_pauli(angle, self._word(num_qubits))

    def _word(self, num_qubits: int) -> PauliString:
        return PauliString.from_sparse(num_qubits, dict(zip(self.targets, self.name)))


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    ops: tuple[CircuitOp, ...] = ()
    num_params: int | None = None

    def __post_init__(self):
        n = _check_qubits(self.num_qubits)
        ops = tuple(self.ops)
        slots = [op.slot for op in ops if op.slot is not None]
        num_params = self.num_params
        if num_params is None:
            num_params = max(slots) + 1 if slots else 0
        for op in ops:
            if max(op.targets) >= n:
                raise InvalidArgument(f"op {op.name} targets {op.targets} outside {n} qubits")
            if op.slot is not None and not 0 <= op.slot < num_params:
                raise InvalidArgument(f"parameter slot {op.slot} outside [0, {num_params})")
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "num_params", int(num_params))

    def bind(self, theta: Sequence[float] = ()) -> list[GateOp]:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.num_params:
            raise InvalidArgument(
                f"circuit has {self.num_params} parameters, got {theta.size}"
            )
        return [op.bind(self.num_qubits, theta) for op in self.ops]


def run_circuit(circuit: Circuit, theta, state: StateVector) -> StateVector:
    """Apply ops in listed order: U(theta) = U_L ... U_1 with U_1 first."""
    if state.num_qubits != circuit.num_qubits:
        raise InvalidArgument("circuit and state qubit counts differ")
    vec = np.array(state.amplitudes)
    for gate in circuit.bind(theta):
        vec = apply_matrix(vec, circuit.num_qubits, gate.matrix, gate.targets)
    return StateVector(circuit.num_qubits, vec)


def parse_circuit(text: str, num_qubits: int | None = None) -> Circuit:
    """Parse ``GATE target[,target] [slot]`` lines (``#`` starts a comment)."""
    ops = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise InvalidArgument(f"line {lineno}: expected 'GATE targets [slot]', got {raw!r}")
        try:
            targets = tuple(int(t) for t in parts[1].split(","))
            slot = int(parts[2]) if len(parts) == 3 else None
        except ValueError:
            raise InvalidArgument(f"line {lineno}: non-integer target or slot in {raw!r}") from None
        try:
            ops.append(CircuitOp(parts[0], targets, slot))
        except InvalidArgument as exc:
            raise InvalidArgument(f"line {lineno}: {exc}") from None
    if num_qubits is None:
        num_qubits = max((max(op.targets) for op in ops), default=0) + 1
    return Circuit(num_qubits, tuple(ops))


def format_circuit(circuit: Circuit) -> str:
    lines = []
    for op in circuit.ops:
        line = f"{op.name} {','.join(map(str, op.targets))}"
        if op.slot is not None:
            line += f" {op.slot}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")


def random_state(num_qubits: int, rng: np.random.Generator) -> StateVector:
    v = rng.normal(size=2**num_qubits) + 1j * rng.normal(size=2**num_qubits)
    return StateVector(num_qubits, v / np.linalg.norm(v))


def pauli_strings(num_qubits: int, letters: Iterable[str] = "IXYZ"):
    """All Pauli strings on ``num_qubits`` qubits (4**n of them)."""
    for combo in itertools.product(list(letters), repeat=num_qubits):
        yield PauliString("".join(combo))
