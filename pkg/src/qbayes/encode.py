"""Feature maps from classical inputs to quantum states.

Three encodings are supported:

* ``basis``     - binary vector x -> |i_x>, i_x = sum_k 2**k x_k (Kronecker kernel)
* ``amplitude`` - real vector, zero-padded to a power of two and normalized
* ``angle``     - one qubit per feature, qubit j rotated by R_x(x_j) from |0>
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DensityMatrix, StateVector, basis_index, init_basis_state, to_density
from .errors import FormatError, InvalidArgument

KINDS = ("basis", "amplitude", "angle")


@dataclass(frozen=True)
class EncodingSpec:
    kind: str
    num_features: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"encoding kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.num_features) < 1:
            raise InvalidArgument("num_features must be positive")
        object.__setattr__(self, "num_features", int(self.num_features))

    @property
    def qubit_budget(self) -> int:
        if self.kind == "amplitude":
            return max(1, math.ceil(math.log2(self.num_features)))
        return self.num_features

    def to_dict(self) -> dict:
        return {"kind": self.kind, "num_features": self.num_features}


def _vector(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.size == 0:
        raise InvalidArgument("input vector is empty")
    return arr


def encode_basis(x) -> StateVector:
    bits = _vector(x)
    if not np.all((bits == 0) | (bits == 1)):
        raise InvalidArgument(f"basis encoding needs entries in {{0, 1}}, got {bits}")
    return init_basis_state(bits.size, bits.astype(int).tolist())


def amplitude_vector(x) -> np.ndarray:
    """Zero-padded, normalized amplitude array for ``x`` (no StateVector wrapper)."""
    x = _vector(x)
    norm = np.linalg.norm(x)
    if not np.isfinite(norm) or norm == 0.0:
        raise InvalidArgument("amplitude encoding of a zero or non-finite vector is undefined")
    dim = 1 << max(1, math.ceil(math.log2(x.size)))
    out = np.zeros(dim, dtype=complex)
    out[: x.size] = x / norm
    return out


def encode_amplitude(x) -> StateVector:
    return StateVector.from_array(amplitude_vector(x))


def angle_vector(x) -> np.ndarray:
    x = _vector(x)
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("angle encoding needs finite entries")
    out = np.ones(1, dtype=complex)
    # little-endian: the last kron factor is qubit 0
    for xj in x:
        out = np.kron(np.array([math.cos(xj / 2), -1j * math.sin(xj / 2)]), out)
    return out


def encode_angle(x) -> StateVector:
    """|x> = R_x(x_1) (x) ... (x) R_x(x_n) |0...0>."""
    x = _vector(x)
    return StateVector(x.size, angle_vector(x))


def encode(x, spec: EncodingSpec) -> StateVector:
    x = _vector(x)
    if x.size != spec.num_features:
        raise InvalidArgument(f"expected {spec.num_features} features, got {x.size}")
    if spec.kind == "basis":
        return encode_basis(x)
    if spec.kind == "amplitude":
        return encode_amplitude(x)
    return encode_angle(x)


def encoded_amplitudes(xs, spec: EncodingSpec) -> np.ndarray:
    """Rows are the encoded states of ``xs``; shape (M, 2**qubit_budget)."""
    return np.stack([encode(x, spec).amplitudes for x in np.atleast_2d(np.asarray(xs, float))])


def feature_density(x, spec: EncodingSpec) -> DensityMatrix:
    """rho(x) = |phi(x)><phi(x)|."""
    return to_density(encode(x, spec))


def basis_integer(x) -> int:
    return basis_index(np.asarray(x, dtype=int).tolist())


def load_csv(path, binary_labels: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Read a dataset CSV: one sample per row, target in the last column.

    With ``binary_labels`` the targets must be +1 or -1; otherwise any real
    value is accepted (regression data).
    """
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if lineno == 1:  # header line
                    continue
                raise FormatError(f"{path}:{lineno}: non-numeric value in {row}") from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(rows[0])
    if width < 2 or any(len(r) != width for r in rows):
        raise FormatError(f"{path}: rows need equal length >= 2")
    data = np.array(rows)
    X, y = data[:, :-1], data[:, -1]
    if binary_labels and not np.all(np.isin(y, (-1.0, 1.0))):
        raise FormatError(f"{path}: labels in the last column must be +1 or -1")
    return X, y


def save_csv(path, X, y) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        for row, label in zip(np.asarray(X), np.asarray(y)):
            label = int(label) if label in (-1, 1) else repr(float(label))
            w.writerow([repr(float(v)) for v in row] + [label])
