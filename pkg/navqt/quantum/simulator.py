"""Backends producing the noisy circuit output.

``ExactBackend`` propagates the density matrix through every channel.
``TrajectoryBackend`` unravels each depolarizing channel into random Pauli
errors and averages statevector runs.

Trajectory randomness: trajectory ``k`` of a plan seeded with ``s`` draws
from ``PCG64(SeedSequence(s, spawn_key=(k,)))``. Within a trajectory one
uniform number is drawn per (layer, qubit), layers in order and qubits
ascending; it selects no error, X, Y or Z with probabilities
1 - 3 lambda/4, lambda/4, lambda/4, lambda/4.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce

import numpy as np

from navqt.core.errors import GuardError, InvalidParameterError, NonHermitianError
from navqt.quantum.ansatz import NoisyAnsatz, layer_angle_slices, layer_unitary_from_angles
from navqt.quantum.qcore import PAULIS, DensityMatrix, is_hermitian

logger = logging.getLogger(__name__)

MAX_TRAJECTORY_RHO_QUBITS = 8
_ERRORS = (None, PAULIS["X"], PAULIS["Y"], PAULIS["Z"])
_ZZ_SIGNS = np.array([[1.0, -1.0], [-1.0, 1.0]])


def _check_lambda(lam: float):
    if not 0.0 <= lam <= 1.0:
        raise InvalidParameterError(f"lambda {lam} outside [0, 1]")


def depolarize_tensor(t: np.ndarray, n: int, qubit: int, lam: float) -> np.ndarray:
    """Pauli form of the channel on a 2n-axis density tensor."""
    if lam == 0.0:
        return t
    shape = [1] * (2 * n)
    shape[qubit] = shape[n + qubit] = 2
    # Z rho Z flips the sign of entries whose row and column bits differ;
    # X rho X flips both bits; Y rho Y = X (Z rho Z) X
    zz = t * _ZZ_SIGNS.reshape(shape)
    axes = (qubit, n + qubit)
    return (1.0 - 0.75 * lam) * t + 0.25 * lam * (np.flip(t, axes) + zz + np.flip(zz, axes))


def apply_depolarizing(rho: DensityMatrix, qubit: int, lam: float) -> DensityMatrix:
    """Apply D(lambda) = (1 - 3 lambda/4) rho + lambda/4 (X rho X + Y rho Y + Z rho Z) to one qubit."""
    _check_lambda(lam)
    if not 0 <= qubit < rho.n_qubits:
        raise InvalidParameterError(f"qubit {qubit} out of range for {rho.n_qubits} qubits")
    n = rho.n_qubits
    t = depolarize_tensor(rho.tensor(), n, qubit, lam)
    return DensityMatrix(t.reshape(rho.dim, rho.dim), n)


def compose_lambdas(*lams: float) -> float:
    """Noise level of consecutive depolarizing channels: 1 - prod(1 - lambda_i)."""
    return 1.0 - reduce(lambda acc, lam: acc * (1.0 - lam), lams, 1.0)


def _layer_unitaries(a: NoisyAnsatz, angles: np.ndarray = None) -> list:
    angles = a.gate_angles() if angles is None else np.asarray(angles, dtype=float)
    return [
        layer_unitary_from_angles(a, i, angles[s])
        for i, s in enumerate(layer_angle_slices(a))
    ]


def evolve_exact(a: NoisyAnsatz, angles: np.ndarray = None, lam: float = None) -> np.ndarray:
    """Output density matrix as a raw array. ``angles`` and ``lam`` override the ansatz values."""
    lam = a.lam if lam is None else lam
    _check_lambda(lam)
    n, d = a.n_qubits, 1 << a.n_qubits
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    for u, layer in zip(_layer_unitaries(a, angles), a.layers):
        rho = u @ rho @ u.conj().T
        t = rho.reshape([2] * (2 * n))
        for q in layer.noise:
            t = depolarize_tensor(t, n, q, lam)
        rho = t.reshape(d, d)
    return 0.5 * (rho + rho.conj().T)


def simulate_exact(a: NoisyAnsatz) -> DensityMatrix:
    """Density matrix of the noisy circuit applied to |0...0>."""
    return DensityMatrix(evolve_exact(a), a.n_qubits)


@dataclass(frozen=True)
class TrajectoryPlan:
    """Sample count and seed of a trajectory estimate."""

    K: int
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.K) < 1:
            raise InvalidParameterError(f"need at least one trajectory, got K={self.K}")

    @staticmethod
    def error_probability(lam: float) -> float:
        return 0.75 * lam

    @classmethod
    def default(cls, n_qubits: int, rng_seed: int = 0) -> "TrajectoryPlan":
        return cls(500 * n_qubits, rng_seed)

    def derive(self, index: int) -> "TrajectoryPlan":
        """A plan with an independent seed, one per evaluation index."""
        seq = np.random.SeedSequence(self.rng_seed, spawn_key=(int(index),))
        return TrajectoryPlan(self.K, int(seq.generate_state(1, dtype=np.uint64)[0]))


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Random stream of trajectory ``index`` under plan seed ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(int(index),))))


def sample_errors(plan: TrajectoryPlan, indices: np.ndarray, n_layers: int, n_qubits: int, lam: float) -> np.ndarray:
    """Error codes (0 none, 1 X, 2 Y, 3 Z) shaped (trajectories, layers, qubits)."""
    u = np.stack([trajectory_rng(plan.rng_seed, k).random(n_layers * n_qubits) for k in indices])
    p_none = 1.0 - 0.75 * lam
    edges = np.array([p_none, p_none + 0.25 * lam, p_none + 0.5 * lam])
    return np.searchsorted(edges, u, side="right").reshape(len(indices), n_layers, n_qubits)


def _apply_pauli_rows(psi: np.ndarray, rows: np.ndarray, p: np.ndarray, qubit: int, n: int):
    if not rows.any():
        return
    t = psi[rows].reshape(-1, 1 << qubit, 2, 1 << (n - qubit - 1))
    psi[rows] = np.einsum("ab,kibj->kiaj", p, t).reshape(-1, 1 << n)


def _run_chunk(a: NoisyAnsatz, unitaries: list, plan: TrajectoryPlan, indices: np.ndarray, lam: float) -> np.ndarray:
    n, d = a.n_qubits, 1 << a.n_qubits
    errors = sample_errors(plan, indices, a.n_layers, n, lam)
    psi = np.zeros((len(indices), d), dtype=complex)
    psi[:, 0] = 1.0
    for li, (u, layer) in enumerate(zip(unitaries, a.layers)):
        psi = psi @ u.T
        for q in layer.noise:
            for code in (1, 2, 3):
                _apply_pauli_rows(psi, errors[:, li, q] == code, _ERRORS[code], q, n)
    return psi


def run_trajectories(
    a: NoisyAnsatz,
    plan: TrajectoryPlan,
    angles: np.ndarray = None,
    lam: float = None,
    workers: int = 1,
) -> np.ndarray:
    """Final statevectors of all K trajectories, row k being trajectory k.

    Rows depend only on (plan seed, k), so any ``workers`` value gives the same array.
    """
    lam = a.lam if lam is None else lam
    _check_lambda(lam)
    unitaries = _layer_unitaries(a, angles)
    indices = np.arange(plan.K)
    if workers <= 1:
        return _run_chunk(a, unitaries, plan, indices, lam)
    chunks = np.array_split(indices, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda idx: _run_chunk(a, unitaries, plan, idx, lam), chunks))
    return np.concatenate(parts)


def simulate_trajectories(
    a: NoisyAnsatz,
    plan: TrajectoryPlan,
    observable: np.ndarray,
    angles: np.ndarray = None,
    lam: float = None,
    workers: int = 1,
) -> tuple[float, float]:
    """Monte Carlo estimate of Tr[O rho] over K noisy trajectories.

    Returns:
        The sample mean and its standard error.

    Raises:
        NonHermitianError: If the observable is not Hermitian.
    """
    if not is_hermitian(observable):
        raise NonHermitianError("observable is not Hermitian")
    psi = run_trajectories(a, plan, angles, lam, workers)
    values = np.einsum("ki,ki->k", psi.conj(), psi @ np.asarray(observable).T).real
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return mean, stderr


def trajectory_density_matrix(a: NoisyAnsatz, plan: TrajectoryPlan, workers: int = 1) -> DensityMatrix:
    """Average of the K trajectory projectors."""
    if a.n_qubits > MAX_TRAJECTORY_RHO_QUBITS:
        raise GuardError(f"trajectory density matrix limited to {MAX_TRAJECTORY_RHO_QUBITS} qubits")
    psi = run_trajectories(a, plan, workers=workers)
    rho = psi.T @ psi.conj() / plan.K
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real, a.n_qubits)


class ExactBackend():
    """Exact density-matrix backend."""

    exact = True

    @classmethod
    def from_config(cls, config) -> "ExactBackend":
        return cls()

    def for_iteration(self, index: int) -> "ExactBackend":
        return self

    def expectation(self, a: NoisyAnsatz, observable: np.ndarray, angles=None, lam=None) -> float:
        rho = evolve_exact(a, angles, lam)
        return float(np.einsum("ij,ji->", observable, rho).real)

    def density_matrix(self, a: NoisyAnsatz) -> DensityMatrix:
        return simulate_exact(a)


class TrajectoryBackend():
    """Pauli-trajectory backend.

    Each optimizer iteration asks for ``for_iteration(i)``, which derives a fresh
    plan seed; all evaluations inside one iteration share it.
    """

    exact = False

    def __init__(self, plan: TrajectoryPlan, workers: int = 1) -> None:
        self.plan = plan
        self.workers = workers

    @classmethod
    def from_config(cls, config) -> "TrajectoryBackend":
        return cls(TrajectoryPlan(config.n_trajectories, config.trajectory_seed))

    def for_iteration(self, index: int) -> "TrajectoryBackend":
        return TrajectoryBackend(self.plan.derive(index), self.workers)

    def expectation(self, a: NoisyAnsatz, observable: np.ndarray, angles=None, lam=None) -> float:
        return simulate_trajectories(a, self.plan, observable, angles, lam, self.workers)[0]

    def density_matrix(self, a: NoisyAnsatz) -> DensityMatrix:
        return trajectory_density_matrix(a, self.plan, self.workers)
