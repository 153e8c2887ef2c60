"""Dense complex linear algebra for N-qubit operators and states.

Qubit 0 is the most significant tensor factor, so basis index 0 is |0...0>.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Iterable

import numpy as np
import scipy.linalg

from navqt.core.errors import (
    DimensionError,
    InvalidParameterError,
    NonHermitianError,
    NonPhysicalStateError,
)

logger = logging.getLogger(__name__)

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Eigenvalues above this (but negative) are roundoff and clamp to 0.
NEGATIVE_EIGEN_TOL = 1e-8
STATE_TOL = 1e-10


def n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise DimensionError(f"dimension {dim} is not a power of 2")
    return n


def pauli(which: str, qubit: int, n_qubits: int) -> np.ndarray:
    """Single-qubit Pauli embedded in an N-qubit register.

    Args:
        which: One of I, X, Y, Z.
        qubit: Target qubit index.
        n_qubits: Register size.

    Returns:
        The 2^N x 2^N operator acting as the Pauli on ``qubit`` and identity elsewhere.

    Raises:
        InvalidParameterError: If the qubit index or letter is out of range.
    """
    if which not in PAULIS:
        raise InvalidParameterError(f"unknown Pauli {which!r}")
    if not 0 <= qubit < n_qubits:
        raise InvalidParameterError(f"qubit {qubit} out of range for {n_qubits} qubits")
    ops = ["I"] * n_qubits
    ops[qubit] = which
    return pauli_string("".join(ops))


def pauli_string(ops: str) -> np.ndarray:
    """Tensor product of the Pauli letters in ``ops``, qubit 0 first."""
    try:
        return reduce(np.kron, (PAULIS[o] for o in ops), np.eye(1, dtype=complex))
    except KeyError as exc:
        raise InvalidParameterError(f"unknown Pauli letter in {ops!r}") from exc


def embed(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Embed a 2x2 operator on ``qubit`` of an N-qubit register."""
    if not 0 <= qubit < n_qubits:
        raise InvalidParameterError(f"qubit {qubit} out of range for {n_qubits} qubits")
    left = np.eye(1 << qubit, dtype=complex)
    right = np.eye(1 << (n_qubits - qubit - 1), dtype=complex)
    return np.kron(np.kron(left, op), right)


def is_hermitian(m: np.ndarray, atol: float = 1e-8) -> bool:
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= atol)


def hermitian_eig(m: np.ndarray, atol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns:
        Ascending real eigenvalues and the unitary whose columns are the eigenvectors.

    Raises:
        NonHermitianError: If ``m`` deviates from its conjugate transpose by more than ``atol``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not is_hermitian(m, atol):
        raise NonHermitianError("matrix is not Hermitian within %g" % atol)
    w, v = scipy.linalg.eigh(m)
    return w, v


def matrix_fn(
    m: np.ndarray,
    f: Callable[[np.ndarray], np.ndarray],
    eigen_floor: float = 0.0,
) -> np.ndarray:
    """Apply a scalar function to a PSD Hermitian matrix through its spectrum.

    Eigenvalues are clamped from below at ``eigen_floor`` before ``f`` is applied;
    pass a tiny positive floor for functions singular at 0 such as ``np.log``.

    Raises:
        NonPhysicalStateError: If an eigenvalue is below -1e-8.
    """
    w, v = hermitian_eig(m)
    if w.size and w[0] < -NEGATIVE_EIGEN_TOL:
        raise NonPhysicalStateError(f"eigenvalue {w[0]:.3e} below -{NEGATIVE_EIGEN_TOL:g}")
    fw = np.asarray(f(np.maximum(w, eigen_floor)))
    out = (v * fw) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def expectation(matrix: np.ndarray, observable: np.ndarray) -> float:
    """Tr[O rho], real part."""
    if matrix.shape != observable.shape:
        raise DimensionError(f"state {matrix.shape} and observable {observable.shape} differ")
    return float(np.einsum("ij,ji->", observable, matrix).real)


def apply_local(tensor: np.ndarray, op: np.ndarray, axis: int) -> np.ndarray:
    """Contract a 2x2 operator into one axis of a qubit tensor."""
    return np.moveaxis(np.tensordot(op, tensor, axes=([1], [axis])), 0, axis)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace state of N qubits.

    The three invariants are checked on construction unless Python runs with ``-O``.
    """

    matrix: np.ndarray
    n_qubits: int

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (1 << self.n_qubits, 1 << self.n_qubits):
            raise DimensionError(f"matrix shape {m.shape} does not fit {self.n_qubits} qubits")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if __debug__:
            self.validate()

    def validate(self):
        m = self.matrix
        if not np.all(np.isfinite(m)):
            raise NonPhysicalStateError("density matrix has non-finite entries")
        if not is_hermitian(m, STATE_TOL):
            raise NonPhysicalStateError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_TOL:
            raise NonPhysicalStateError(f"density matrix trace is {tr!r}")
        w = scipy.linalg.eigvalsh(m)
        if w[0] < -STATE_TOL:
            raise NonPhysicalStateError(f"density matrix eigenvalue {w[0]:.3e} is negative")

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @classmethod
    def from_array(cls, matrix: np.ndarray) -> "DensityMatrix":
        matrix = np.asarray(matrix, dtype=complex)
        return cls(matrix, n_qubits_of(matrix.shape[0]))

    @classmethod
    def pure(cls, state: "StateVector") -> "DensityMatrix":
        a = state.amplitudes
        return cls(np.outer(a, a.conj()), state.n_qubits)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        d = 1 << n_qubits
        return cls(np.eye(d, dtype=complex) / d, n_qubits)

    @classmethod
    def zero(cls, n_qubits: int) -> "DensityMatrix":
        return cls.pure(StateVector.zero(n_qubits))

    def tensor(self) -> np.ndarray:
        return self.matrix.reshape([2] * (2 * self.n_qubits))

    def eigenvalues(self) -> np.ndarray:
        return scipy.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm pure state of N qubits."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex).reshape(-1)
        n_qubits_of(a.size)
        if __debug__ and abs(np.linalg.norm(a) - 1.0) > STATE_TOL:
            raise NonPhysicalStateError(f"state norm is {np.linalg.norm(a)!r}")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.amplitudes.size)

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        a = np.zeros(1 << n_qubits, dtype=complex)
        a[0] = 1.0
        return cls(a)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the ``keep`` qubits, in ascending qubit order."""
    n = rho.n_qubits
    keep = sorted(set(keep))
    if not keep:
        raise InvalidParameterError("keep must name at least one qubit")
    if keep[0] < 0 or keep[-1] >= n:
        raise InvalidParameterError(f"keep {keep} out of range for {n} qubits")
    traced = [q for q in range(n) if q not in keep]
    perm = keep + traced + [n + q for q in keep] + [n + q for q in traced]
    dk, dt = 1 << len(keep), 1 << len(traced)
    t = rho.tensor().transpose(perm).reshape(dk, dt, dk, dt)
    return DensityMatrix(np.einsum("ajbj->ab", t), len(keep))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (g + g.conj().T)


def random_density_matrix(n_qubits: int, rng: np.random.Generator, rank: int = None) -> DensityMatrix:
    """Random state from the Ginibre ensemble, full rank unless ``rank`` is given."""
    d = 1 << n_qubits
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    m = g @ g.conj().T
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(m / np.trace(m).real, n_qubits)


def random_state_vector(n_qubits: int, rng: np.random.Generator) -> StateVector:
    d = 1 << n_qubits
    a = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return StateVector(a / np.linalg.norm(a))
