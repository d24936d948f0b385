import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbayes.algos import (
    MapObjective,
    OracleSpec,
    default_iterations,
    grover_amplitudes,
    grover_search,
    minimize_map,
    success_probability,
)
from qbayes.errors import InvalidArgument


def dense_grover(N, marked, k):
    """Reference: explicit oracle and diffusion matrices."""
    O = np.eye(N)
    O[marked, marked] = -1
    s = np.full(N, 1 / math.sqrt(N))
    D = 2 * np.outer(s, s) - np.eye(N)
    psi = s.copy()
    for _ in range(k):
        psi = D @ (O @ psi)
    return psi


def test_n4_k1_certain():
    r = grover_search(OracleSpec(4, 2), 1, seed=0)
    assert abs(r.probability - 1) < 1e-9 and r.index == 2


def test_n8_k2():
    r = grover_search(OracleSpec(8, 5), 2, seed=0)
    assert abs(r.probability - 0.9453125) < 1e-9
    assert abs(r.probability - math.sin(5 * math.asin(1 / math.sqrt(8))) ** 2) < 1e-12


def test_k0_uniform():
    assert abs(grover_search(OracleSpec(16, 3), 0).probability - 1 / 16) < 1e-15


def test_default_iterations():
    assert grover_search(OracleSpec(64, 0)).iterations == default_iterations(64) == 6


def test_oracle_validation():
    with pytest.raises(InvalidArgument):
        OracleSpec(6, 0)
    with pytest.raises(InvalidArgument):
        OracleSpec(8, 8)
    with pytest.raises(InvalidArgument):
        grover_search(OracleSpec(8, 0), -1)


def test_grover_matches_dense_matrices():
    for N in (4, 8, 32):
        for k in range(6):
            np.testing.assert_allclose(grover_amplitudes(N, [1], k), dense_grover(N, 1, k), atol=1e-12)


@settings(max_examples=40)
@given(st.integers(2, 10), st.integers(0, 50), st.integers(0, 1023))
def test_unmarked_amplitudes_stay_uniform(n, k, marked):
    N = 2**n
    marked %= N
    psi = grover_amplitudes(N, [marked], k)
    rest = np.delete(psi, marked)
    assert np.ptp(rest) < 1e-12
    assert abs(psi[marked] ** 2 - success_probability(N, k)) < 1e-9


def test_grover_sampling_deterministic():
    a = grover_search(OracleSpec(32, 7), seed=3)
    b = grover_search(OracleSpec(32, 7), seed=3)
    assert a == b


def test_minmap_constant():
    r = minimize_map(MapObjective(np.full(8, 2.5)), seed=1, budget=10)
    assert r.value == 2.5 and r.index == 0


def test_minmap_example_table():
    r = minimize_map(MapObjective([3, 1, 4, 1, 5, 9, 2, 6]), seed=0, budget=30)
    assert r.value == 1 and r.index == 1


def test_minmap_never_worse_than_initial():
    rng = np.random.default_rng(0)
    for seed in range(50):
        t = rng.normal(size=int(rng.integers(1, 40)))
        r = minimize_map(MapObjective(t), seed=seed, budget=3)
        assert r.value <= r.initial_value
        assert t[r.index] == r.value


def test_minmap_matches_linear_scan():
    rng = np.random.default_rng(1234)
    hits = 0
    for trial in range(100):
        size = int(rng.integers(2, 257))
        t = rng.normal(size=size)
        budget = 30 * math.ceil(math.log2(size))
        r = minimize_map(MapObjective(t), seed=trial, budget=budget)
        hits += r.index == int(np.argmin(t))
    assert hits >= 95


def test_minmap_from_losses_with_penalty():
    losses = np.array([[1.0, 2.0, 0.5], [1.0, 0.0, 0.5]])
    obj = MapObjective.from_losses(losses, penalty=[0.0, 0.0, 5.0], lam=0.1)
    np.testing.assert_allclose(obj.loss_table, [2.0, 2.0, 1.5])
    r = minimize_map(obj, seed=2, budget=20)
    assert r.index == 2


def test_minmap_validation():
    with pytest.raises(InvalidArgument):
        MapObjective([])
    with pytest.raises(InvalidArgument):
        MapObjective([1.0, math.inf])
    with pytest.raises(InvalidArgument):
        minimize_map(MapObjective([1.0]), seed=0, budget=0)
