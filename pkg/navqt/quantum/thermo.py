"""Thermodynamic quantities of N-qubit states.

All entropies are in nats. The approximate entropy treats every depolarizing
channel of the circuit as if it acted first, on |0...0>, where m stacked
channels of level lambda act like one channel of level 1 - (1 - lambda)^m on
each qubit independently.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg
from scipy.special import entr, logsumexp

from navqt.core.errors import DimensionError, InvalidParameterError, NonHermitianError, NonPhysicalStateError
from navqt.quantum.hamiltonian import PauliHamiltonian, materialize, spectrum
from navqt.quantum.qcore import NEGATIVE_EIGEN_TOL, DensityMatrix, hermitian_eig, matrix_fn

logger = logging.getLogger(__name__)

# State eigenvalues below this count as 0 in the fidelity.
FIDELITY_CUTOFF = 1e-12
FIDELITY_CLIP_TOL = 1e-9
IMAG_TOL = 1e-10

HamiltonianLike = Union[PauliHamiltonian, np.ndarray]


@dataclass(frozen=True)
class ThermoParams:
    """Temperature and circuit size entering the approximate free energy."""

    beta: float
    n_qubits: int
    n_layers: int = 1

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidParameterError(f"beta must be positive, got {self.beta}")
        if self.n_layers < 1:
            raise InvalidParameterError(f"need at least one layer, got {self.n_layers}")

    @property
    def temperature(self) -> float:
        return 1.0 / self.beta

    def effective_lambda(self, lam: float) -> float:
        return 1.0 - (1.0 - lam) ** self.n_layers

    def entropy(self, lam: float) -> float:
        return approx_entropy(lam, self.n_layers, self.n_qubits)

    def entropy_grad(self, lam: float) -> float:
        return approx_entropy_grad(lam, self.n_layers, self.n_qubits)

    def free_energy(self, e: float, lam: float) -> float:
        return free_energy(e, self.entropy(lam), self.beta)


def _check_beta(beta: float):
    if not beta > 0:
        raise InvalidParameterError(f"beta must be positive, got {beta}")


def _matrix(h: HamiltonianLike) -> np.ndarray:
    return materialize(h) if isinstance(h, PauliHamiltonian) else np.asarray(h, dtype=complex)


def _eigh(h: HamiltonianLike) -> tuple[np.ndarray, np.ndarray]:
    return spectrum(h) if isinstance(h, PauliHamiltonian) else hermitian_eig(h)


def _state_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def log_partition(h: HamiltonianLike, beta: float) -> float:
    """ln Tr exp(-beta H), evaluated on the spectrum without overflow."""
    _check_beta(beta)
    w, _ = _eigh(h)
    return float(logsumexp(-beta * w))


def thermal_state(h: HamiltonianLike, beta: float) -> DensityMatrix:
    """Gibbs state exp(-beta H) / Z.

    Exponents are shifted by the lowest eigenvalue, so every Boltzmann weight
    is at most 1 and large beta cannot overflow.

    Raises:
        InvalidParameterError: If beta <= 0.
        GuardError: Above 10 qubits.
    """
    _check_beta(beta)
    w, v = _eigh(h)
    shifted = -beta * (w - w[0])
    log_p = shifted - logsumexp(shifted)
    p = np.exp(log_p)
    p /= p.sum()
    rho = (v * p) @ v.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho, int(round(math.log2(w.size))))


def thermal_free_energy(h: HamiltonianLike, beta: float) -> float:
    """-ln Z / beta, the free energy of the Gibbs state."""
    return -log_partition(h, beta) / beta


def energy(rho, h: HamiltonianLike) -> float:
    """Tr[H rho]; a complex residue above 1e-10 raises NonHermitianError."""
    m, hm = _state_matrix(rho), _matrix(h)
    if m.shape != hm.shape:
        raise DimensionError(f"state {m.shape} and Hamiltonian {hm.shape} differ")
    value = np.einsum("ij,ji->", hm, m)
    if abs(value.imag) > IMAG_TOL:
        raise NonHermitianError(f"energy has imaginary part {value.imag:.3e}")
    return float(value.real)


def von_neumann_entropy(rho) -> float:
    """-Tr[rho ln rho] with 0 ln 0 = 0."""
    w = scipy.linalg.eigvalsh(_state_matrix(rho))
    if w.size and w[0] < -NEGATIVE_EIGEN_TOL:
        raise NonPhysicalStateError(f"eigenvalue {w[0]:.3e} below -{NEGATIVE_EIGEN_TOL:g}")
    return float(np.sum(entr(np.clip(w, 0.0, None))))


def _check_lambda(lam: float):
    if not 0.0 <= lam <= 1.0:
        raise InvalidParameterError(f"lambda {lam} outside [0, 1]")


def approx_entropy(lam: float, m: int, n: int) -> float:
    """N times the entropy of one qubit depolarized to level 1 - (1 - lambda)^m.

    Examples:
        >>> round(approx_entropy(0.5, 2, 1), 4)
        0.6616
    """
    _check_lambda(lam)
    big = 1.0 - (1.0 - lam) ** m
    return float(n * np.sum(entr(np.array([1.0 - 0.5 * big, 0.5 * big]))))


def approx_entropy_grad(lam: float, m: int, n: int) -> float:
    """Analytic derivative of ``approx_entropy`` in lambda.

    Raises:
        InvalidParameterError: If lambda is outside (0, 1]; at 0 the derivative diverges.
    """
    if not 0.0 < lam <= 1.0:
        raise InvalidParameterError(f"entropy gradient needs lambda in (0, 1], got {lam}")
    q = (1.0 - lam) ** m
    big = 1.0 - q
    return float(n * 0.5 * m * (1.0 - lam) ** (m - 1) * (math.log1p(-0.5 * big) - math.log(0.5 * big)))


def free_energy(e: float, s: float, beta: float) -> float:
    _check_beta(beta)
    return e - s / beta


def approx_free_energy(e: float, lam: float, m: int, n: int, beta: float) -> float:
    """E - S~/beta, the cost minimized by the approximate trainer."""
    return free_energy(e, approx_entropy(lam, m, n), beta)


def free_energy_of_state(rho, h: HamiltonianLike, beta: float) -> float:
    """E - S/beta of an explicit state; the Gibbs state is its global minimizer."""
    return free_energy(energy(rho, h), von_neumann_entropy(rho), beta)


def _sqrt_cut(w: np.ndarray) -> np.ndarray:
    return np.sqrt(np.where(w > FIDELITY_CUTOFF, w, 0.0))


def fidelity(rho1, rho2) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)).

    Evaluated as the trace norm of sqrt(rho1) sqrt(rho2), whose singular values
    carry no square-root amplification of roundoff; the result is symmetric.

    Raises:
        DimensionError: If the sizes differ.
        NonPhysicalStateError: If either input has an eigenvalue below -1e-8.
    """
    a, b = _state_matrix(rho1), _state_matrix(rho2)
    if a.shape != b.shape:
        raise DimensionError(f"states of shape {a.shape} and {b.shape}")
    f = float(np.sum(scipy.linalg.svdvals(matrix_fn(a, _sqrt_cut) @ matrix_fn(b, _sqrt_cut))))
    if -FIDELITY_CLIP_TOL <= f < 0.0 or 1.0 < f <= 1.0 + FIDELITY_CLIP_TOL:
        f = min(max(f, 0.0), 1.0)
    return f
