import numpy as np
import pytest

from navqt.core.errors import GuardError, InvalidParameterError, NonHermitianError
from navqt.quantum import simulator as sim
from navqt.quantum.ansatz import build_ansatz
from navqt.quantum.hamiltonian import build_model, build_ising, materialize
from navqt.quantum.qcore import PAULIS, DensityMatrix, partial_trace, pauli, random_density_matrix


def _convex_form(rho, qubit, lam):
    n = rho.n_qubits
    out = (1 - 0.75 * lam) * rho.matrix
    for p in "XYZ":
        op = pauli(p, qubit, n)
        out = out + 0.25 * lam * op @ rho.matrix @ op
    return out


def test_depolarizing_endpoints():
    rng = np.random.default_rng(0)
    rho = random_density_matrix(2, rng)
    assert np.allclose(sim.apply_depolarizing(rho, 0, 0.0).matrix, rho.matrix)
    full = sim.apply_depolarizing(rho, 0, 1.0)
    assert np.allclose(full.matrix, np.kron(np.eye(2) / 2, partial_trace(rho, [1]).matrix))


def test_depolarizing_matches_convex_form():
    rng = np.random.default_rng(1)
    for _ in range(20):
        rho = random_density_matrix(3, rng)
        qubit, lam = int(rng.integers(3)), float(rng.random())
        assert np.allclose(sim.apply_depolarizing(rho, qubit, lam).matrix, _convex_form(rho, qubit, lam), atol=1e-13)


def test_depolarizing_errors():
    rho = DensityMatrix.zero(2)
    with pytest.raises(InvalidParameterError):
        sim.apply_depolarizing(rho, 0, 1.5)
    with pytest.raises(InvalidParameterError):
        sim.apply_depolarizing(rho, 2, 0.1)


def test_compose_half_half():
    assert sim.compose_lambdas(0.5, 0.5) == 0.75
    rho = random_density_matrix(1, np.random.default_rng(2))
    twice = sim.apply_depolarizing(sim.apply_depolarizing(rho, 0, 0.5), 0, 0.5)
    assert np.allclose(twice.matrix, sim.apply_depolarizing(rho, 0, 0.75).matrix, atol=1e-12)


def test_composition_law():
    rng = np.random.default_rng(3)
    for _ in range(100):
        rho = random_density_matrix(2, rng)
        q = int(rng.integers(2))
        l1, l2 = rng.random(2)
        two = sim.apply_depolarizing(sim.apply_depolarizing(rho, q, l1), q, l2)
        one = sim.apply_depolarizing(rho, q, sim.compose_lambdas(l1, l2))
        assert np.max(np.abs(two.matrix - one.matrix)) < 1e-12


def test_simulate_exact_single_qubit():
    a = build_ansatz(1, layers=1, lambda_init=0.4, theta_seed=None)
    assert np.allclose(sim.simulate_exact(a).matrix, np.diag([0.8, 0.2]))


def test_simulate_exact_noiseless_is_pure():
    a = build_ansatz(3, lambda_init=0.0, lambda_min=0.0, theta_seed=2)
    rho = sim.simulate_exact(a)
    assert np.max(rho.eigenvalues()) == pytest.approx(1.0)


def test_evolve_exact_overrides():
    a = build_ansatz(2, lambda_init=0.1)
    moved = sim.evolve_exact(a, angles=a.gate_angles() * 2, lam=0.3)
    assert np.allclose(moved, sim.evolve_exact(a.with_params(theta=a.theta * 2, lam=0.3)))


def test_trajectory_plan():
    with pytest.raises(InvalidParameterError):
        sim.TrajectoryPlan(0)
    assert sim.TrajectoryPlan.default(3).K == 1500
    plan = sim.TrajectoryPlan(10, 4)
    assert plan.derive(1) == plan.derive(1)
    assert plan.derive(1).rng_seed != plan.derive(2).rng_seed
    assert sim.TrajectoryPlan.error_probability(0.4) == pytest.approx(0.3)


def test_sample_errors_frequencies():
    plan = sim.TrajectoryPlan(20000, 5)
    codes = sim.sample_errors(plan, np.arange(plan.K), 1, 1, 0.4).ravel()
    freq = np.bincount(codes, minlength=4) / codes.size
    assert np.allclose(freq, [0.7, 0.1, 0.1, 0.1], atol=0.015)


def test_trajectories_noiseless_have_no_spread():
    a = build_ansatz(3, lambda_init=0.0, lambda_min=0.0)
    h = materialize(build_ising(3))
    mean, stderr = sim.simulate_trajectories(a, sim.TrajectoryPlan(50), h)
    assert stderr == pytest.approx(0.0, abs=1e-12)
    assert mean == pytest.approx(sim.ExactBackend().expectation(a, h))


def test_trajectories_match_exact_energy():
    a = build_ansatz(3, lambda_init=0.3, theta_seed=1)
    a = a.with_params(theta=np.random.default_rng(1).uniform(0, np.pi, a.n_params))
    h = materialize(build_ising(3))
    mean, stderr = sim.simulate_trajectories(a, sim.TrajectoryPlan(1500, 7), h)
    exact = sim.ExactBackend().expectation(a, h)
    assert stderr > 0
    assert abs(mean - exact) < 4 * stderr


def test_trajectories_single_qubit_z():
    a = build_ansatz(1, layers=1, lambda_init=0.4, theta_seed=None)
    mean, _ = sim.simulate_trajectories(a, sim.TrajectoryPlan(20000, 3), PAULIS["Z"])
    assert mean == pytest.approx(0.6, abs=0.03)


def test_trajectories_reject_non_hermitian():
    a = build_ansatz(1, layers=1)
    with pytest.raises(NonHermitianError):
        sim.simulate_trajectories(a, sim.TrajectoryPlan(2), np.array([[0, 1], [0, 0]]))


def test_trajectories_independent_of_workers():
    a = build_ansatz(3, lambda_init=0.5)
    plan = sim.TrajectoryPlan(101, 9)
    serial = sim.run_trajectories(a, plan)
    threaded = sim.run_trajectories(a, plan, workers=3)
    assert np.allclose(serial, threaded, atol=1e-12)


def test_trajectory_density_matrix():
    a = build_ansatz(2, lambda_init=0.0, lambda_min=0.0, theta_seed=3)
    rho = sim.trajectory_density_matrix(a, sim.TrajectoryPlan(5))
    assert np.max(rho.eigenvalues()) == pytest.approx(1.0)
    noisy = a.with_params(lam=0.3)
    est = sim.trajectory_density_matrix(noisy, sim.TrajectoryPlan(4000, 1), workers=2)
    assert abs(np.trace(est.matrix) - 1.0) < 1e-12
    assert np.linalg.norm(est.matrix - sim.simulate_exact(noisy).matrix, 2) < 0.1


def test_trajectory_density_matrix_default_plan():
    a = build_ansatz(3, lambda_init=0.3, theta_seed=None)
    a = a.with_params(theta=np.random.default_rng(8).uniform(0.0, np.pi, a.n_params))
    plan = sim.TrajectoryPlan.default(3, rng_seed=2)
    assert plan.K == 1500
    est = sim.trajectory_density_matrix(a, plan)
    assert np.allclose(est.matrix, est.matrix.conj().T)
    assert abs(np.trace(est.matrix) - 1.0) < 1e-12
    assert np.linalg.norm(est.matrix - sim.simulate_exact(a).matrix, 2) < 0.1


def test_trajectory_density_matrix_guard():
    with pytest.raises(GuardError):
        sim.trajectory_density_matrix(build_ansatz(9), sim.TrajectoryPlan(1))


def test_backends():
    a = build_ansatz(2, lambda_init=0.2)
    h = materialize(build_ising(2))
    exact = sim.ExactBackend()
    assert exact.for_iteration(3) is exact
    assert exact.expectation(a, h) == pytest.approx(np.trace(h @ sim.simulate_exact(a).matrix).real)
    traj = sim.TrajectoryBackend(sim.TrajectoryPlan(200, 1))
    assert not traj.exact
    assert traj.for_iteration(4).plan == traj.for_iteration(4).plan
    assert traj.for_iteration(4).expectation(a, h) == traj.for_iteration(4).expectation(a, h)
    assert traj.density_matrix(a).n_qubits == 2


@pytest.mark.integration
def test_trajectory_estimates_cover_exact_energy():
    for model in ("IC", "TFI"):
        for n in (3, 4, 5):
            h = materialize(build_model(model, n))
            for lam in (0.1, 0.5):
                a = build_ansatz(n, lambda_init=lam)
                a = a.with_params(theta=np.random.default_rng(n).uniform(0, np.pi, a.n_params))
                exact = sim.ExactBackend().expectation(a, h)
                plan = sim.TrajectoryPlan.default(n, 1000 * n)
                hits = 0
                for rep in range(100):
                    mean, stderr = sim.simulate_trajectories(a, plan.derive(rep), h)
                    hits += abs(mean - exact) <= 3 * stderr
                assert hits >= 95, (model, n, lam, hits)
