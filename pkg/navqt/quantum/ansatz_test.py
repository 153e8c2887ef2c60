import math

import numpy as np
import pytest
import scipy.linalg

from navqt.core.errors import InvalidParameterError
from navqt.quantum import ansatz as az
from navqt.quantum.qcore import PAULIS, embed, pauli_string


@pytest.mark.parametrize("n,binding,layers,slots", [
    (2, "restricted", 1, 2),
    (3, "restricted", 2, 4),
    (4, "flexible", 2, 24),
    (1, "flexible", 1, 2),
])
def test_slot_counts(n, binding, layers, slots):
    a = az.build_ansatz(n, binding=binding)
    assert a.n_layers == layers
    assert a.n_params == slots
    assert a.theta.shape == (slots,)


def test_gate_order():
    a = az.build_ansatz(3, layers=1)
    kinds = [g.kind for g in a.layers[0].gates]
    assert kinds == ["RZZ"] * 3 + ["RZ"] * 3 + ["RX"] * 3
    assert [g.param_slot for g in a.gates] == [0] * 6 + [1] * 3
    assert a.layers[0].noise == (0, 1, 2)


def test_theta_init_range():
    a = az.build_ansatz(4, binding="flexible", theta_seed=11)
    assert np.all(a.theta >= az.THETA_INIT_RANGE[0])
    assert np.all(a.theta <= az.THETA_INIT_RANGE[1])
    assert np.array_equal(a.theta, az.build_ansatz(4, binding="flexible", theta_seed=11).theta)


def test_zero_angles_identity():
    a = az.build_ansatz(3, theta_seed=None)
    assert np.allclose(az.circuit_unitary(a), np.eye(8))


def test_rx_quarter_turn():
    a = az.build_ansatz(1, layers=1, theta_seed=None).with_params(theta=[0.0, math.pi / 4])
    psi = az.circuit_unitary(a)[:, 0]
    assert np.allclose(np.abs(psi) ** 2, [0.5, 0.5])


def test_unitary():
    rng = np.random.default_rng(3)
    a = az.build_ansatz(4, binding="flexible")
    a = a.with_params(theta=rng.uniform(0, np.pi, a.n_params))
    u = az.circuit_unitary(a)
    assert np.allclose(u.conj().T @ u, np.eye(16), atol=1e-12)


def test_restricted_layer_matches_generators():
    n = 3
    a = az.build_ansatz(n, layers=1).with_params(theta=[0.37, 1.1])
    phase = sum(pauli_string("".join("Z" if k in b else "I" for k in range(n))) for b in az.ring_bonds(n))
    phase = phase + sum(embed(PAULIS["Z"], q, n) for q in range(n))
    mixer = sum(embed(PAULIS["X"], q, n) for q in range(n))
    expected = scipy.linalg.expm(-1j * 1.1 * mixer) @ scipy.linalg.expm(-1j * 0.37 * phase)
    assert np.allclose(az.layer_unitary(a, 0), expected, atol=1e-12)


def test_to_flexible_same_unitary():
    a = az.build_ansatz(4, theta_seed=5)
    flex = az.to_flexible(a)
    assert flex.binding == "flexible"
    assert flex.n_params == len(a.gates)
    assert np.allclose(az.circuit_unitary(flex), az.circuit_unitary(a), atol=1e-12)


def test_diagonal_gates_commute():
    rng = np.random.default_rng(9)
    a = az.build_ansatz(3, layers=1, binding="flexible")
    a = a.with_params(theta=rng.uniform(0, np.pi, a.n_params))
    angles = a.gate_angles()
    order = [3, 4, 5, 0, 1, 2, 6, 7, 8]
    swapped = az.NoisyAnsatz(3, 1, (az.Layer(tuple(a.layers[0].gates[i] for i in order), (0, 1, 2)),),
                             "flexible", a.theta, a.lam)
    assert np.allclose(az.layer_unitary_from_angles(swapped, 0, angles[order]), az.layer_unitary(a, 0), atol=1e-12)


def test_layer_out_of_range():
    with pytest.raises(InvalidParameterError):
        az.layer_unitary(az.build_ansatz(2), 1)


def test_clamp_lambda():
    a = az.build_ansatz(2, lambda_init=0.5)
    assert az.clamp_lambda(a, -3.0) == az.LAMBDA_MIN
    assert az.clamp_lambda(a, 1.7) == 1.0
    assert az.clamp_lambda(a, 0.25) == 0.25


@pytest.mark.parametrize("kwargs", [
    dict(lambda_init=1.5),
    dict(lambda_init=1e-9, lambda_min=1e-8),
    dict(binding="tied"),
    dict(layers=0),
])
def test_build_errors(kwargs):
    with pytest.raises(InvalidParameterError):
        az.build_ansatz(3, **kwargs)


def test_build_needs_a_qubit():
    with pytest.raises(InvalidParameterError):
        az.build_ansatz(0)


def test_params_are_immutable():
    a = az.build_ansatz(2)
    b = a.with_params(lam=0.3)
    assert a.lam == 0.001 and b.lam == 0.3
    with pytest.raises(ValueError):
        a.theta[0] = 1.0
    with pytest.raises(InvalidParameterError):
        a.with_params(theta=[0.1])
    with pytest.raises(InvalidParameterError):
        a.with_params(lam=2.0)


def test_dict_round_trip():
    a = az.build_ansatz(3, binding="flexible", lambda_init=0.2, theta_seed=4)
    b = az.NoisyAnsatz.from_dict(a.to_dict())
    assert b.binding == a.binding and b.lam == a.lam and b.n_layers == a.n_layers
    assert np.array_equal(b.theta, a.theta)
