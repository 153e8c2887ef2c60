import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from navqt.core.errors import DimensionError, InvalidParameterError, NonPhysicalStateError
from navqt.quantum import thermo as th
from navqt.quantum.ansatz import build_ansatz
from navqt.quantum.hamiltonian import build_ising, build_model, materialize, spectrum
from navqt.quantum.qcore import PAULIS, DensityMatrix, random_density_matrix
from navqt.quantum.simulator import apply_depolarizing, simulate_exact

LAMBDAS = (0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99)


def test_two_level_thermal_state():
    h = np.diag([0.0, 1.0])
    rho = th.thermal_state(h, 2.0)
    p0 = 1.0 / (1.0 + math.exp(-2.0))
    assert np.allclose(rho.matrix, np.diag([p0, 1 - p0]))
    assert th.log_partition(h, 2.0) == pytest.approx(math.log(1 + math.exp(-2.0)))


def test_log_partition_ising_pair():
    # levels -3, 1, 1, 1
    h = build_ising(2)
    assert th.log_partition(h, 1.0) == pytest.approx(math.log(math.exp(3) + 3 * math.exp(-1)))
    assert th.thermal_free_energy(h, 1000.0) == pytest.approx(-3.0)
    assert np.isfinite(th.log_partition(h, 1e4))


def test_thermal_state_limits():
    h = build_ising(3)
    hot = th.thermal_state(h, 1e-9)
    assert np.max(np.abs(hot.matrix - np.eye(8) / 8)) < 1e-8
    cold = th.thermal_state(h, 50.0)
    assert cold.matrix[0, 0].real == pytest.approx(1.0)


def test_thermal_state_bad_beta():
    with pytest.raises(InvalidParameterError):
        th.thermal_state(build_ising(2), 0.0)
    with pytest.raises(InvalidParameterError):
        th.log_partition(build_ising(2), -1.0)


@pytest.mark.parametrize("model", ["IC", "TFI", "Heisenberg"])
@pytest.mark.parametrize("mode", ["uniform", "random"])
def test_thermal_state_stable_when_cold(model, mode):
    h = build_model(model, 4, mode, seed=1)
    rho = th.thermal_state(h, 100.0)
    assert np.all(np.isfinite(rho.matrix))
    assert abs(np.trace(rho.matrix).real - 1.0) <= 1e-10
    assert rho.eigenvalues()[0] >= -1e-12
    assert abs(th.fidelity(rho, rho) - 1.0) <= 1e-9


def test_energy():
    zero = DensityMatrix.zero(1)
    assert th.energy(zero, PAULIS["Z"]) == 1.0
    assert th.energy(DensityMatrix.maximally_mixed(3), build_ising(3)) == pytest.approx(0.0)
    with pytest.raises(DimensionError):
        th.energy(zero, build_ising(2))


def test_von_neumann_entropy():
    assert th.von_neumann_entropy(DensityMatrix.zero(2)) == pytest.approx(0.0, abs=1e-12)
    assert th.von_neumann_entropy(DensityMatrix.maximally_mixed(3)) == pytest.approx(3 * math.log(2))
    s = th.von_neumann_entropy(np.diag([0.8, 0.2]))
    assert s == pytest.approx(-(0.8 * math.log(0.8) + 0.2 * math.log(0.2)))
    with pytest.raises(NonPhysicalStateError):
        th.von_neumann_entropy(np.diag([1.1, -0.1]))


def test_approx_entropy_values():
    assert th.approx_entropy(0.5, 2, 1) == pytest.approx(0.6616, abs=1e-4)
    assert th.approx_entropy(0.0, 3, 4) == 0.0
    assert th.approx_entropy(1.0, 2, 5) == pytest.approx(5 * math.log(2))
    with pytest.raises(InvalidParameterError):
        th.approx_entropy(1.2, 1, 1)


def test_approx_entropy_monotone():
    values = [th.approx_entropy(lam, 2, 2) for lam in np.linspace(0, 1, 50)]
    assert np.all(np.diff(values) > 0)


@pytest.mark.parametrize("n", range(1, 7))
def test_approx_entropy_matches_stacked_channels(n):
    for m in range(1, 5):
        for lam in LAMBDAS:
            rho = DensityMatrix.zero(n)
            for _ in range(m):
                for q in range(n):
                    rho = apply_depolarizing(rho, q, lam)
            assert abs(th.approx_entropy(lam, m, n) - th.von_neumann_entropy(rho)) < 1e-10


def test_approx_entropy_grad_matches_finite_differences():
    h = 1e-6
    for n in range(1, 7):
        for m in range(1, 5):
            for lam in np.linspace(0.01, 0.99, 25):
                fd = (th.approx_entropy(lam + h, m, n) - th.approx_entropy(lam - h, m, n)) / (2 * h)
                assert th.approx_entropy_grad(lam, m, n) == pytest.approx(fd, rel=1e-4, abs=1e-8)


def test_approx_entropy_grad_edges():
    for m in range(1, 5):
        assert th.approx_entropy_grad(1.0, m, 3) == pytest.approx(0.0, abs=1e-15)
    assert all(th.approx_entropy_grad(lam, 2, 2) > 0 for lam in LAMBDAS)
    with pytest.raises(InvalidParameterError):
        th.approx_entropy_grad(0.0, 1, 1)


def test_thermo_params():
    p = th.ThermoParams(beta=4.0, n_qubits=3, n_layers=2)
    assert p.temperature == 0.25
    assert p.effective_lambda(0.5) == 0.75
    assert p.entropy(0.3) == th.approx_entropy(0.3, 2, 3)
    assert p.entropy_grad(0.3) == th.approx_entropy_grad(0.3, 2, 3)
    assert p.free_energy(-1.0, 0.3) == th.approx_free_energy(-1.0, 0.3, 2, 3, 4.0)
    with pytest.raises(InvalidParameterError):
        th.ThermoParams(beta=0.0, n_qubits=1)
    with pytest.raises(InvalidParameterError):
        th.ThermoParams(beta=1.0, n_qubits=1, n_layers=0)


def test_free_energy():
    assert th.free_energy(-1.0, math.log(2), 2.0) == pytest.approx(-1.0 - math.log(2) / 2)
    assert th.free_energy(3.0, 0.0, 1e-3) == 3.0
    with pytest.raises(InvalidParameterError):
        th.free_energy(0.0, 1.0, 0.0)


def test_free_energy_of_thermal_state():
    for h in (build_ising(3), build_model("Heisenberg", 3, "random", 2)):
        for beta in (0.1, 1.0, 10.0):
            rho = th.thermal_state(h, beta)
            assert th.free_energy_of_state(rho, h, beta) == pytest.approx(th.thermal_free_energy(h, beta), abs=1e-10)


def test_fidelity_examples():
    zero, one = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert th.fidelity(zero, one) == pytest.approx(0.0, abs=1e-12)
    assert th.fidelity(zero, np.eye(2) / 2) == pytest.approx(math.sqrt(0.5))
    assert th.fidelity(np.eye(4) / 4, np.eye(4) / 4) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        th.fidelity(zero, np.eye(4) / 4)
    with pytest.raises(NonPhysicalStateError):
        th.fidelity(zero, np.diag([1.1, -0.1]))


def test_fidelity_symmetric_and_bounded():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a, b = random_density_matrix(2, rng), random_density_matrix(2, rng, rank=1)
        f = th.fidelity(a, b)
        assert 0.0 <= f <= 1.0
        assert f == pytest.approx(th.fidelity(b, a), abs=1e-10)
        # a pure state reduces the fidelity to sqrt(<psi|a|psi>)
        assert f == pytest.approx(math.sqrt(np.trace(a.matrix @ b.matrix).real), abs=1e-8)


def test_gibbs_state_minimizes_free_energy():
    rng = np.random.default_rng(11)
    for n in (1, 2, 3):
        h = materialize(build_model("TFI", max(n, 2), "random", n)) if n > 1 else np.diag([0.3, -0.7])
        for beta in (0.1, 1.0, 10.0):
            floor = th.thermal_free_energy(h, beta)
            for _ in range(200 // 9 + 1):
                rho = random_density_matrix(n, rng, rank=int(rng.integers(1, (1 << n) + 1)))
                assert th.free_energy_of_state(rho, h, beta) >= floor - 1e-10


def test_cold_ising_is_ground_projector():
    h = build_ising(3)
    w, v = spectrum(h)
    ground = v[:, np.abs(w - w[0]) < 1e-9]
    projector = ground @ ground.conj().T / ground.shape[1]
    assert th.fidelity(th.thermal_state(h, 100.0), projector) >= 1 - 1e-6
    assert th.energy(DensityMatrix(projector, 3), h) == pytest.approx(-6.0)


def test_entropy_unitary_invariance():
    rng = np.random.default_rng(11)
    for n in (1, 2, 3):
        rho = random_density_matrix(n, rng).matrix
        u = unitary_group.rvs(1 << n, random_state=rng)
        rotated = u @ rho @ u.conj().T
        assert abs(th.von_neumann_entropy(rotated) - th.von_neumann_entropy(rho)) < 1e-10


@pytest.mark.parametrize("lam", [0.1, 0.5])
def test_approx_entropy_bounds_random_circuits(lam):
    a = build_ansatz(4, layers=2, lambda_init=lam, theta_seed=None, lambda_min=0.0)
    approx = th.approx_entropy(lam, 2, 4)
    rng = np.random.default_rng(4)
    entropies = np.array([
        th.von_neumann_entropy(simulate_exact(a.with_params(theta=rng.uniform(0.0, math.pi, a.n_params))))
        for _ in range(100)
    ])
    # isolated dips are tolerated, the bound has to hold on average
    assert np.sum(entropies < approx - 1e-9) <= 5
    assert entropies.mean() >= approx
