"""In-place statevector kernels for Pauli strings and their exponentials.

A Pauli string P acts on a computational basis state as

    P |x> = phase * (-1)**popcount(x & zmask) |x ^ flip>

where ``flip`` marks X/Y letters, ``zmask`` marks Z/Y letters and
``phase = i**(number of Y letters)``. Every hot loop of the simulator
(variational circuits, Trotter factors, expectations) reduces to these three
routines. numba is used when importable; the numpy versions are exact
fallbacks and are also exercised by the test-suite.
"""
from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _parity_np(idx: np.ndarray, mask: int) -> np.ndarray:
    par = np.zeros(idx.shape, dtype=np.int64)
    bit = 0
    while mask >> bit:
        if (mask >> bit) & 1:
            par ^= (idx >> bit) & 1
        bit += 1
    return par


def _signs_np(size: int, zmask: int) -> np.ndarray:
    idx = np.arange(size, dtype=np.int64)
    return 1.0 - 2.0 * _parity_np(idx, zmask)


def pauli_apply_np(vec, flip, zmask, phase):
    idx = np.arange(vec.size, dtype=np.int64)
    src = idx ^ flip
    return phase * (1.0 - 2.0 * _parity_np(src, zmask)) * vec[src]


def exp_pauli_inplace_np(vec, c, s, flip, zmask, phase):
    """vec <- (c*I + i*s*P) vec."""
    vec[:] = c * vec + (1j * s) * pauli_apply_np(vec, flip, zmask, phase)


def pauli_cross_np(bra, ket, flip, zmask, phase):
    """<bra| P |ket>."""
    return complex(np.vdot(bra, pauli_apply_np(ket, flip, zmask, phase)))


if numba is not None:

    @numba.njit(cache=True, inline="always")
    def _sign(x, zmask):
        x &= zmask
        par = 0
        while x:
            x &= x - 1
            par ^= 1
        return -1.0 if par else 1.0

    @numba.njit(cache=True, nogil=True)
    def _pauli_apply_nb(vec, flip, zmask, phase):
        out = np.empty_like(vec)
        for i in range(vec.size):
            j = i ^ flip
            out[i] = (phase * _sign(j, zmask)) * vec[j]
        return out

    @numba.njit(cache=True, nogil=True)
    def _exp_pauli_inplace_nb(vec, c, s, flip, zmask, phase):
        isp = 1j * s * phase
        if flip == 0:
            for i in range(vec.size):
                vec[i] *= c + isp * _sign(i, zmask)
            return
        hb = 1
        while hb <= flip:
            hb <<= 1
        hb >>= 1
        for i in range(vec.size):
            if i & hb:
                continue
            j = i ^ flip
            a = vec[i]
            b = vec[j]
            vec[i] = c * a + isp * _sign(j, zmask) * b
            vec[j] = c * b + isp * _sign(i, zmask) * a

    @numba.njit(cache=True, nogil=True)
    def _pauli_cross_nb(bra, ket, flip, zmask, phase):
        acc = 0j
        for i in range(bra.size):
            j = i ^ flip
            acc += np.conj(bra[i]) * _sign(j, zmask) * ket[j]
        return acc * phase

    def pauli_apply(vec, flip, zmask, phase):
        return _pauli_apply_nb(vec, flip, zmask, complex(phase))

    def exp_pauli_inplace(vec, c, s, flip, zmask, phase):
        _exp_pauli_inplace_nb(vec, float(c), float(s), flip, zmask, complex(phase))

    def pauli_cross(bra, ket, flip, zmask, phase):
        return complex(_pauli_cross_nb(bra, ket, flip, zmask, complex(phase)))

    HAVE_NUMBA = True
else:  # pragma: no cover
    pauli_apply = pauli_apply_np
    exp_pauli_inplace = exp_pauli_inplace_np
    pauli_cross = pauli_cross_np
    HAVE_NUMBA = False
