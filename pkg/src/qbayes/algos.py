"""Grover search and Grover-based minimization of a precomputed loss table."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import StateVector, measure_shots
from .errors import InvalidArgument


@dataclass(frozen=True)
class OracleSpec:
    domain_size: int
    marked: int

    def __post_init__(self):
        N = int(self.domain_size)
        if N < 2 or N & (N - 1):
            raise InvalidArgument(f"domain size must be a power of two >= 2, got {N}")
        if not 0 <= int(self.marked) < N:
            raise InvalidArgument(f"marked index {self.marked} outside [0, {N})")


@dataclass(frozen=True)
class GroverResult:
    index: int
    probability: float
    iterations: int


def default_iterations(N: int, m: int = 1) -> int:
    return int(math.floor(math.pi / 4 * math.sqrt(N / m)))


def success_probability(N: int, k: int, m: int = 1) -> float:
    """Closed form sin^2((2k+1) * asin(sqrt(m/N)))."""
    return math.sin((2 * k + 1) * math.asin(math.sqrt(m / N))) ** 2


def grover_amplitudes(N: int, marked, iterations: int) -> np.ndarray:
    """Statevector after ``iterations`` Grover steps from the uniform state.

    Each step flips the phase of the marked indices and reflects about the
    mean amplitude.
    """
    mask = np.zeros(N, dtype=bool)
    mask[np.asarray(marked, dtype=int)] = True
    psi = np.full(N, 1.0 / math.sqrt(N))
    for _ in range(int(iterations)):
        psi[mask] *= -1.0
        psi = 2.0 * psi.mean() - psi
    return psi


def grover_search(oracle: OracleSpec, iterations: int | None = None, seed: int = 0) -> GroverResult:
    N = int(oracle.domain_size)
    k = default_iterations(N) if iterations is None else int(iterations)
    if k < 0:
        raise InvalidArgument("iterations must be >= 0")
    psi = grover_amplitudes(N, [oracle.marked], k)
    prob = float(psi[oracle.marked] ** 2)
    state = StateVector.from_array(psi)
    index = int(np.argmax(measure_shots(state, 1, seed)))
    return GroverResult(index, prob, k)


# ---------------------------------------------------------------------------
# Threshold descent for arg min_y  sum_x f(x, y) + lambda * phi(y)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MapObjective:
    loss_table: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.loss_table, dtype=float).reshape(-1)
        if t.size == 0:
            raise InvalidArgument("loss table is empty")
        if not np.all(np.isfinite(t)):
            raise InvalidArgument("loss table must be finite")
        if self.lam < 0:
            raise InvalidArgument("lambda must be >= 0")
        t.setflags(write=False)
        object.__setattr__(self, "loss_table", t)

    @property
    def candidate_count(self) -> int:
        return self.loss_table.size

    @classmethod
    def from_losses(cls, losses, penalty=None, lam: float = 0.0) -> "MapObjective":
        """Table from per-datum losses ``losses[x, y]`` plus ``lam * penalty[y]``."""
        losses = np.atleast_2d(np.asarray(losses, dtype=float))
        table = losses.sum(axis=0)
        if penalty is not None:
            table = table + lam * np.asarray(penalty, dtype=float)
        return cls(table, lam)


@dataclass(frozen=True)
class MapResult:
    index: int
    value: float
    probability: float
    initial_value: float
    rounds: int


def minimize_map(obj: MapObjective, seed: int, budget: int) -> MapResult:
    """Durr-Hoyer style threshold descent.

    Each round runs Grover on the set {y : loss(y) < threshold}, with the
    iteration count drawn uniformly below floor(pi/4 sqrt(N/m_guess)); the
    marked-count guess halves after every unsuccessful round. A measured
    candidate that beats the threshold becomes the new threshold. Ties in the
    returned value resolve to the lowest index. ``probability`` is the exact
    marked-set mass of the round that produced the returned value (1.0 if the
    initial draw was never improved upon).
    """
    if int(budget) < 1:
        raise InvalidArgument("budget must be >= 1")
    table = obj.loss_table
    size = table.size
    N = 1 << max(1, math.ceil(math.log2(size)))
    padded = np.full(N, np.inf)
    padded[:size] = table
    rng = np.random.default_rng(seed)

    threshold = initial = float(table[int(rng.integers(size))])
    prob = 1.0
    m_guess = N / 2.0
    for _ in range(int(budget)):
        marked = np.flatnonzero(padded < threshold)
        k_max = default_iterations(N, max(m_guess, 1.0))
        k = int(rng.integers(k_max + 1))
        if marked.size:
            psi = grover_amplitudes(N, marked, k)
        else:
            psi = np.full(N, 1.0 / math.sqrt(N))
        p = psi**2
        j = int(rng.choice(N, p=p / p.sum()))
        if padded[j] < threshold:
            threshold = float(padded[j])
            prob = float(p[marked].sum())
        else:
            m_guess = max(1.0, m_guess / 2.0)
    index = int(np.flatnonzero(table == threshold)[0])
    return MapResult(index, threshold, prob, initial, int(budget))
