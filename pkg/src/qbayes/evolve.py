"""Unitary and stochastic iterate maps.

Quantum side: exact evolution exp(-iHt), symmetric Trotter splitting and the
quantum Fourier transform. Classical side: Markov-chain propagation
p(t) = P^t p(0). Time evolution uses the exp(-iHt) sign convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .core import (
    GateOp,
    PauliString,
    StateVector,
    apply_matrix,
    controlled_phase,
    standard_gate,
)
from .errors import InvalidArgument, UnsupportedSizeError

#: largest register evolve_exact will exponentiate densely
EXACT_MAX_QUBITS = 10
#: largest dimension qft() builds as a dense matrix; bigger inputs use gates
QFT_DENSE_MAX = 1 << 12


@dataclass(frozen=True)
class Hamiltonian:
    """H = sum_l c_l P_l with real c_l and Pauli strings P_l."""

    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        terms = tuple((float(c), p if isinstance(p, PauliString) else PauliString(p)) for c, p in self.terms)
        if not terms:
            raise InvalidArgument("Hamiltonian needs at least one term")
        n = terms[0][1].num_qubits
        for c, p in terms:
            if not math.isfinite(c):
                raise InvalidArgument(f"non-finite coefficient {c}")
            if p.num_qubits != n:
                raise InvalidArgument("all terms need the same qubit count")
        object.__setattr__(self, "terms", terms)

    @property
    def num_qubits(self) -> int:
        return self.terms[0][1].num_qubits

    def matrix(self) -> np.ndarray:
        return sum(c * p.matrix() for c, p in self.terms)

    def is_commuting(self) -> bool:
        return all(
            a.commutes_with(b) for i, (_, a) in enumerate(self.terms) for _, b in self.terms[i + 1 :]
        )


def parse_hamiltonian(text: str) -> Hamiltonian:
    """One term per line: ``coeff LETTERS`` (``0.5 XZI``; letter k acts on qubit k)."""
    terms = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidArgument(f"line {lineno}: expected 'coeff LETTERS', got {raw!r}")
        try:
            coeff = float(parts[0])
        except ValueError:
            raise InvalidArgument(f"line {lineno}: bad coefficient {parts[0]!r}") from None
        terms.append((coeff, PauliString(parts[1])))
    return Hamiltonian(tuple(terms))


def format_hamiltonian(h: Hamiltonian) -> str:
    return "".join(f"{c!r} {p.letters}\n" for c, p in h.terms)


def _check_state(h: Hamiltonian, state: StateVector):
    if state.num_qubits != h.num_qubits:
        raise InvalidArgument(
            f"state has {state.num_qubits} qubits, Hamiltonian {h.num_qubits}"
        )


def exact_propagator(h: Hamiltonian, t: float) -> np.ndarray:
    if h.num_qubits > EXACT_MAX_QUBITS:
        raise UnsupportedSizeError(
            f"dense exponential limited to {EXACT_MAX_QUBITS} qubits, got {h.num_qubits}"
        )
    evals, evecs = np.linalg.eigh(h.matrix())
    return (evecs * np.exp(-1j * evals * float(t))) @ evecs.conj().T


def evolve_exact(h: Hamiltonian, t: float, state: StateVector) -> StateVector:
    """|psi(t)> = exp(-iHt)|psi(0)> via the eigendecomposition of H."""
    _check_state(h, state)
    return StateVector(h.num_qubits, exact_propagator(h, t) @ state.amplitudes)


def _half_factors(h: Hamiltonian, delta: float):
    # exp(-i c P delta/2) == exp_pauli(theta=-c*delta/2)
    return [(-c * delta / 2.0, p) for c, p in h.terms]


def trotter_step(h: Hamiltonian, delta: float) -> GateOp:
    """Symmetric splitting: half steps for terms 1..L, then L..1."""
    delta = float(delta)
    if not math.isfinite(delta):
        raise InvalidArgument("delta must be finite")
    dim = 2**h.num_qubits
    half = np.eye(dim, dtype=complex)
    for theta, p in _half_factors(h, delta):
        # later factors act after earlier ones -> left-multiply
        half = (math.cos(theta) * np.eye(dim) + 1j * math.sin(theta) * p.matrix()) @ half
    forward = half
    backward = np.eye(dim, dtype=complex)
    for theta, p in reversed(_half_factors(h, delta)):
        backward = (math.cos(theta) * np.eye(dim) + 1j * math.sin(theta) * p.matrix()) @ backward
    return GateOp("TROTTER", tuple(range(h.num_qubits)), backward @ forward, delta)


def evolve_trotter(h: Hamiltonian, t: float, steps: int, state: StateVector) -> StateVector:
    """``steps`` symmetric Trotter steps of size t/steps, applied term by term."""
    _check_state(h, state)
    if int(steps) < 1:
        raise InvalidArgument("steps must be >= 1")
    factors = _half_factors(h, float(t) / int(steps))
    sequence = factors + factors[::-1]
    masks = [(math.cos(th), math.sin(th), *p.masks()) for th, p in sequence]
    vec = np.array(state.amplitudes)
    for _ in range(int(steps)):
        for c, s, flip, zmask, phase in masks:
            _kernels.exp_pauli_inplace(vec, c, s, flip, zmask, phase)
    return StateVector(h.num_qubits, vec)


# ---------------------------------------------------------------------------
# Quantum Fourier transform
# ---------------------------------------------------------------------------


def _qft_size(q: int) -> int:
    q = int(q)
    if q < 2 or q & (q - 1):
        raise InvalidArgument(f"QFT dimension must be a power of two >= 2, got {q}")
    return q


def qft_matrix(q: int) -> np.ndarray:
    """F[p, x] = exp(2*pi*i*p*x/q) / sqrt(q)."""
    q = _qft_size(q)
    px = np.outer(np.arange(q), np.arange(q)) % q
    return np.exp(2j * np.pi * px / q) / math.sqrt(q)


def qft_circuit(num_qubits: int) -> list[GateOp]:
    """Hadamard + controlled-phase decomposition, then qubit reversal."""
    n = int(num_qubits)
    gates: list[GateOp] = []
    for j in reversed(range(n)):
        gates.append(standard_gate("H", j))
        for m in reversed(range(j)):
            gates.append(controlled_phase(math.pi / 2 ** (j - m), m, j))
    for i in range(n // 2):
        gates.append(standard_gate("SWAP", (i, n - 1 - i)))
    return gates


def qft_gates(state: StateVector) -> StateVector:
    vec = np.array(state.amplitudes)
    for g in qft_circuit(state.num_qubits):
        vec = apply_matrix(vec, state.num_qubits, g.matrix, g.targets)
    return StateVector(state.num_qubits, vec)


def qft(q: int, state: StateVector) -> StateVector:
    q = _qft_size(q)
    if state.dim != q:
        raise InvalidArgument(f"state dimension {state.dim} != q = {q}")
    if q > QFT_DENSE_MAX:
        return qft_gates(state)
    return StateVector(state.num_qubits, qft_matrix(q) @ state.amplitudes)


# ---------------------------------------------------------------------------
# Markov chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Column-stochastic transition matrix: p_next = P @ p."""

    entries: np.ndarray

    def __post_init__(self):
        P = np.array(self.entries, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
            raise InvalidArgument("transition matrix must be square")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=0) - 1.0)) > 1e-12:
            raise InvalidArgument("columns must be nonnegative and sum to 1")
        P.setflags(write=False)
        object.__setattr__(self, "entries", P)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def markov_evolve(p0: Sequence[float], P: StochasticMatrix, t: int) -> np.ndarray:
    p = np.array(p0, dtype=float).reshape(-1)
    if p.size != P.dim:
        raise InvalidArgument(f"distribution length {p.size} != matrix size {P.dim}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise InvalidArgument("p0 must be a probability vector")
    if int(t) < 0:
        raise InvalidArgument("t must be >= 0")
    for _ in range(int(t)):
        p = P.entries @ p
    return p
