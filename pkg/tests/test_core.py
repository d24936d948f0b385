import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from qbayes import _kernels
from qbayes.core import (
    Circuit,
    CircuitOp,
    DensityMatrix,
    GateOp,
    PauliString,
    StateVector,
    apply,
    born_pmf,
    exp_pauli,
    expectation,
    format_circuit,
    init_basis_state,
    measure_shots,
    mix_ensemble,
    parse_circuit,
    random_state,
    rotation_gate,
    run_circuit,
    standard_gate,
    to_density,
    zero_state,
)
from qbayes.errors import InvalidArgument, UnsupportedSizeError

SQ2 = 1 / math.sqrt(2)
PLUS = StateVector(1, [SQ2, SQ2])

pauli_letters = st.text(alphabet="IXYZ", min_size=1, max_size=4)


def dense_op(matrix, targets, n):
    """Full-register matrix of a gate, built column by column from basis states."""
    full = np.zeros((2**n, 2**n), dtype=complex)
    k = len(targets)
    for col in range(2**n):
        local_in = sum(((col >> t) & 1) << i for i, t in enumerate(targets))
        for local_out in range(2**k):
            amp = matrix[local_out, local_in]
            if amp == 0:
                continue
            row = col
            for i, t in enumerate(targets):
                row = (row & ~(1 << t)) | (((local_out >> i) & 1) << t)
            full[row, col] += amp
    return full


# -- init_basis_state -------------------------------------------------------


def test_basis_state_single_zero():
    np.testing.assert_array_equal(init_basis_state(1, [0]).amplitudes, [1, 0])


def test_basis_state_little_endian():
    s = init_basis_state(2, [1, 0])
    assert s.amplitudes[1] == 1 and np.count_nonzero(s.amplitudes) == 1


def test_basis_state_all_ones():
    assert init_basis_state(3, [1, 1, 1]).amplitudes[7] == 1


def test_basis_state_length_mismatch():
    with pytest.raises(InvalidArgument):
        init_basis_state(2, [1])


def test_state_rejects_bad_length_and_norm():
    with pytest.raises(InvalidArgument):
        StateVector(2, [1, 0, 0])
    with pytest.raises(InvalidArgument):
        StateVector(1, [1, 1])


def test_qubit_cap():
    with pytest.raises(UnsupportedSizeError):
        zero_state(25)


def test_state_is_immutable():
    s = zero_state(1)
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0


# -- gates ------------------------------------------------------------------


def test_x_flips_zero():
    np.testing.assert_array_equal(apply(zero_state(1), standard_gate("X", 0)).amplitudes, [0, 1])


def test_x_swaps_amplitudes():
    s = StateVector(1, [0.6, 0.8j])
    np.testing.assert_allclose(apply(s, standard_gate("X", 0)).amplitudes, [0.8j, 0.6])


def test_not_is_bit_flip():
    np.testing.assert_array_equal(standard_gate("NOT", 0).matrix, standard_gate("X", 0).matrix)
    assert not np.allclose(standard_gate("NOT", 0).matrix, np.eye(2))


def test_hadamard_on_zero():
    np.testing.assert_allclose(apply(zero_state(1), standard_gate("H", 0)).amplitudes, [SQ2, SQ2])


def test_standard_gate_errors():
    with pytest.raises(InvalidArgument):
        standard_gate("FOO", 0)
    with pytest.raises(InvalidArgument):
        standard_gate("CNOT", 0)
    with pytest.raises(InvalidArgument):
        standard_gate("X", (0, 1))


def test_bell_pair():
    s = apply(zero_state(2), standard_gate("H", 0))
    s = apply(s, standard_gate("CNOT", (0, 1)))
    np.testing.assert_allclose(s.amplitudes, [SQ2, 0, 0, SQ2], atol=1e-15)


def test_cnot_control_is_first_target():
    # control qubit 1 set, target qubit 0 flips: |x0=0, x1=1> (index 2) -> index 3
    s = apply(init_basis_state(2, [0, 1]), standard_gate("CNOT", (1, 0)))
    assert abs(s.amplitudes[3]) == 1


def test_identity_gate_leaves_state():
    s = random_state(3, np.random.default_rng(0))
    out = apply(s, GateOp("I", (1,), np.eye(2)))
    np.testing.assert_array_equal(out.amplitudes, s.amplitudes)


def test_apply_target_out_of_range():
    with pytest.raises(InvalidArgument):
        apply(zero_state(1), standard_gate("X", 1))


def test_gateop_rejects_non_unitary():
    with pytest.raises(InvalidArgument):
        GateOp("bad", (0,), [[1, 1], [0, 1]])
    with pytest.raises(InvalidArgument):
        GateOp("dup", (0, 0), np.eye(4))


def test_rx_zero_is_identity():
    np.testing.assert_array_equal(rotation_gate("x", 0.0, 0).matrix, np.eye(2))


def test_rx_pi_on_zero():
    out = apply(zero_state(1), rotation_gate("x", math.pi, 0)).amplitudes
    np.testing.assert_allclose(out, [0, -1j], atol=1e-15)


@given(st.floats(-10, 10))
def test_rx_inverse(phi):
    m = rotation_gate("x", phi, 0).matrix @ rotation_gate("x", -phi, 0).matrix
    np.testing.assert_allclose(m, np.eye(2), atol=1e-12)


def test_rx_matrix_form():
    phi = 0.7
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    np.testing.assert_allclose(rotation_gate("x", phi, 0).matrix, [[c, -1j * s], [-1j * s, c]])


def test_rotation_rejects_nonfinite():
    with pytest.raises(InvalidArgument):
        rotation_gate("x", math.inf, 0)
    with pytest.raises(InvalidArgument):
        rotation_gate("w", 1.0, 0)


def test_exp_pauli_zero_is_identity():
    np.testing.assert_array_equal(exp_pauli(0.0, PauliString("XZ")).matrix, np.eye(4))


def test_exp_pauli_half_pi_is_ix():
    np.testing.assert_allclose(exp_pauli(math.pi / 2, PauliString("X")).matrix, 1j * np.array([[0, 1], [1, 0]]), atol=1e-15)


@settings(max_examples=60)
@given(pauli_letters, st.floats(-6, 6))
def test_exp_pauli_matches_expm(letters, theta):
    sigma = PauliString(letters)
    n = sigma.num_qubits
    g = exp_pauli(theta, sigma)
    full = dense_op(g.matrix, g.targets, n)
    np.testing.assert_allclose(full, expm(1j * theta * sigma.matrix()), atol=1e-9)
    np.testing.assert_allclose(full.conj().T @ full, np.eye(2**n), atol=1e-10)


def test_exp_pauli_unitary_random_three_qubit():
    rng = np.random.default_rng(3)
    for _ in range(20):
        sigma = PauliString("".join(rng.choice(list("IXYZ"), 3)))
        m = exp_pauli(rng.uniform(-5, 5), sigma).matrix
        np.testing.assert_allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-10)


@given(pauli_letters)
def test_pauli_hermitian_unitary_pm1(letters):
    m = PauliString(letters).matrix()
    np.testing.assert_allclose(m, m.conj().T)
    np.testing.assert_allclose(m @ m, np.eye(m.shape[0]))
    np.testing.assert_allclose(np.sort(np.abs(np.linalg.eigvalsh(m))), 1.0)


def test_pauli_letter_order():
    # letters[k] acts on qubit k: "XI" flips qubit 0
    out = PauliString("XI").matrix() @ init_basis_state(2, [0, 0]).amplitudes
    assert out[1] == 1


def test_pauli_commutation():
    assert PauliString("XX").commutes_with(PauliString("ZZ"))
    assert not PauliString("XI").commutes_with(PauliString("ZI"))


def test_apply_matches_dense_reference():
    rng = np.random.default_rng(11)
    n = 4
    for _ in range(20):
        k = int(rng.integers(1, 4))
        targets = tuple(rng.choice(n, k, replace=False).tolist())
        q, _ = np.linalg.qr(rng.normal(size=(2**k, 2**k)) + 1j * rng.normal(size=(2**k, 2**k)))
        s = random_state(n, rng)
        out = apply(s, GateOp("U", targets, q)).amplitudes
        np.testing.assert_allclose(out, dense_op(q, targets, n) @ s.amplitudes, atol=1e-12)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_norm_preserved_under_random_gates(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    s = random_state(n, rng)
    names = ["X", "Y", "Z", "H"] + (["CNOT", "CZ", "SWAP"] if n > 1 else [])
    for _ in range(15):
        name = names[rng.integers(len(names))]
        arity = 2 if name in ("CNOT", "CZ", "SWAP") else 1
        s = apply(s, standard_gate(name, tuple(rng.choice(n, arity, replace=False).tolist())))
        s = apply(s, rotation_gate("xyz"[rng.integers(3)], rng.uniform(-4, 4), int(rng.integers(n))))
        assert abs(s.norm() - 1.0) < 1e-12


# -- numba kernels vs numpy reference ---------------------------------------


@settings(max_examples=60)
@given(st.text(alphabet="IXYZ", min_size=1, max_size=6), st.floats(-4, 4), st.integers(0, 1000))
def test_kernels_match_numpy_and_dense(letters, theta, seed):
    sigma = PauliString(letters)
    rng = np.random.default_rng(seed)
    v = random_state(sigma.num_qubits, rng).amplitudes.copy()
    w = random_state(sigma.num_qubits, rng).amplitudes.copy()
    masks = sigma.masks()
    dense = sigma.matrix()
    np.testing.assert_allclose(_kernels.pauli_apply(v, *masks), dense @ v, atol=1e-13)
    np.testing.assert_allclose(_kernels.pauli_apply_np(v, *masks), dense @ v, atol=1e-13)
    c, s = math.cos(theta), math.sin(theta)
    a, b = v.copy(), v.copy()
    _kernels.exp_pauli_inplace(a, c, s, *masks)
    _kernels.exp_pauli_inplace_np(b, c, s, *masks)
    ref = expm(1j * theta * dense) @ v
    np.testing.assert_allclose(a, ref, atol=1e-12)
    np.testing.assert_allclose(b, ref, atol=1e-12)
    cross = np.vdot(w, dense @ v)
    assert abs(_kernels.pauli_cross(w, v, *masks) - cross) < 1e-12
    assert abs(_kernels.pauli_cross_np(w, v, *masks) - cross) < 1e-12


# -- circuits ---------------------------------------------------------------


def test_empty_circuit_identity():
    s = random_state(2, np.random.default_rng(1))
    np.testing.assert_array_equal(run_circuit(Circuit(2), [], s).amplitudes, s.amplitudes)


def test_xx_circuit_returns_zero():
    c = Circuit(1, (CircuitOp("X", (0,)), CircuitOp("X", (0,))))
    np.testing.assert_array_equal(run_circuit(c, [], zero_state(1)).amplitudes, [1, 0])


def test_hh_circuit_identity():
    s = random_state(3, np.random.default_rng(2))
    c = Circuit(3, (CircuitOp("H", (1,)), CircuitOp("H", (1,))))
    np.testing.assert_allclose(run_circuit(c, [], s).amplitudes, s.amplitudes, atol=1e-12)


def test_circuit_order_first_op_first():
    # H then RX: composition RX @ H, not H @ RX
    c = Circuit(1, (CircuitOp("H", (0,)), CircuitOp("RX", (0,), 0)))
    out = run_circuit(c, [0.9], zero_state(1)).amplitudes
    ref = rotation_gate("x", 0.9, 0).matrix @ standard_gate("H", 0).matrix @ [1, 0]
    np.testing.assert_allclose(out, ref)


def test_circuit_param_length_mismatch():
    c = Circuit(1, (CircuitOp("RX", (0,), 0),))
    with pytest.raises(InvalidArgument):
        run_circuit(c, [0.1, 0.2], zero_state(1))


def test_circuit_validation():
    with pytest.raises(InvalidArgument):
        Circuit(1, (CircuitOp("X", (1,)),))
    with pytest.raises(InvalidArgument):
        Circuit(1, (CircuitOp("RX", (0,), 2),), num_params=1)
    with pytest.raises(InvalidArgument):
        CircuitOp("RX", (0,))


def test_parse_and_format_roundtrip():
    text = "# bell\nh 0\ncnot 0,1\nrx 1 0\nXZ 0,1 1\n"
    c = parse_circuit(text)
    assert c.num_qubits == 2 and c.num_params == 2
    assert format_circuit(c) == "H 0\nCNOT 0,1\nRX 1 0\nXZ 0,1 1\n"
    assert parse_circuit(format_circuit(c)) == c


def test_parse_pauli_word_slot_is_exponential():
    c = parse_circuit("XZ 0,1 0\n")
    out = run_circuit(c, [0.4], zero_state(2)).amplitudes
    ref = expm(1j * 0.4 * PauliString("XZ").matrix()) @ zero_state(2).amplitudes
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_parse_error_reports_line():
    with pytest.raises(InvalidArgument, match="line 2"):
        parse_circuit("H 0\nFOO 1\n")


# -- densities and measurement ------------------------------------------------


def test_density_of_zero():
    np.testing.assert_array_equal(to_density(zero_state(1)).entries, [[1, 0], [0, 0]])


def test_density_of_plus():
    np.testing.assert_allclose(to_density(PLUS).entries, np.full((2, 2), 0.5))


@given(st.integers(0, 10000), st.integers(1, 4))
def test_pure_density_purity(seed, n):
    rho = to_density(random_state(n, np.random.default_rng(seed)))
    assert abs(rho.purity() - 1.0) < 1e-9
    assert abs(rho.trace() - 1.0) < 1e-10


def test_mix_single_state():
    s = random_state(2, np.random.default_rng(5))
    np.testing.assert_allclose(mix_ensemble([s], [1.0]).entries, to_density(s).entries)


def test_mix_maximally_mixed():
    rho = mix_ensemble([init_basis_state(1, [0]), init_basis_state(1, [1])], [0.5, 0.5])
    np.testing.assert_allclose(rho.entries, np.eye(2) / 2)
    assert abs(rho.purity() - 0.5) < 1e-12


@settings(max_examples=30)
@given(st.integers(0, 10000))
def test_mix_is_psd(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    p = rng.dirichlet(np.ones(k))
    rho = mix_ensemble([random_state(2, rng) for _ in range(k)], p)
    assert rho.eigenvalues().min() >= -1e-9
    pmf = born_pmf(rho)
    assert abs(pmf.sum() - 1) < 1e-10 and pmf.min() >= -1e-12


def test_mix_rejects_bad_probs():
    s = zero_state(1)
    with pytest.raises(InvalidArgument):
        mix_ensemble([s, s], [0.7, 0.7])
    with pytest.raises(InvalidArgument):
        mix_ensemble([s, s], [1.5, -0.5])


def test_density_validation():
    with pytest.raises(InvalidArgument):
        DensityMatrix(1, [[1, 1], [0, 0]])
    with pytest.raises(InvalidArgument):
        DensityMatrix(1, [[1.5, 0], [0, -0.5]])


def test_born_pmf_examples():
    np.testing.assert_allclose(born_pmf(to_density(init_basis_state(1, [1]))), [0, 1])
    s = StateVector(1, [0.5, math.sqrt(3) / 2])
    assert abs(born_pmf(to_density(s))[1] - 0.75) < 1e-15
    np.testing.assert_allclose(born_pmf(DensityMatrix(1, np.eye(2) / 2)), [0.5, 0.5])


def test_measure_zero_state():
    counts = measure_shots(zero_state(2), 500, 1)
    assert counts[0] == 500 and counts.sum() == 500


def test_measure_plus_frequency():
    counts = measure_shots(PLUS, 100_000, 42)
    assert abs(counts[1] / 1e5 - 0.5) <= 3 * math.sqrt(0.25 / 1e5)


def test_measure_deterministic_per_seed():
    s = random_state(3, np.random.default_rng(9))
    np.testing.assert_array_equal(measure_shots(s, 1000, 4), measure_shots(s, 1000, 4))


def test_measure_chi_square():
    from scipy.stats import chisquare

    s = random_state(3, np.random.default_rng(21))
    counts = measure_shots(s, 100_000, 8)
    p = chisquare(counts, 1e5 * s.probabilities()).pvalue
    assert p > 1e-4


def test_measure_rejects_zero_shots():
    with pytest.raises(InvalidArgument):
        measure_shots(PLUS, 0, 0)


def test_expectation_examples():
    assert expectation(zero_state(1), PauliString("Z")) == 1
    assert expectation(init_basis_state(1, [1]), PauliString("Y")) == 0
    assert abs(expectation(PLUS, PauliString("X")) - 1) < 1e-15
    with pytest.raises(InvalidArgument):
        expectation(PLUS, PauliString("XX"))


@given(pauli_letters, st.integers(0, 1000))
def test_expectation_real_bounded(letters, seed):
    sigma = PauliString(letters)
    s = random_state(sigma.num_qubits, np.random.default_rng(seed))
    val = expectation(s, sigma)
    dense = np.vdot(s.amplitudes, sigma.matrix() @ s.amplitudes)
    assert abs(dense.imag) < 1e-10
    assert abs(val - dense.real) < 1e-12
    assert -1 - 1e-12 <= val <= 1 + 1e-12
