"""Layered QAOA-style circuit with a trainable depolarizing level.

Each layer applies RZZ on every ring bond, RZ on every qubit, RX on every
qubit, then one depolarizing channel per qubit. All rotations follow
R_P(theta) = exp(-i theta P).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from navqt.core.errors import InvalidParameterError
from navqt.quantum.hamiltonian import ring_bonds
from navqt.quantum.qcore import PAULIS, apply_local

logger = logging.getLogger(__name__)

GATE_KINDS = ("RZZ", "RZ", "RX")
BINDINGS = ("restricted", "flexible")
THETA_INIT_RANGE = (0.0001, 0.05)
LAMBDA_MIN = 1e-8


@dataclass(frozen=True)
class GateSpec:
    kind: str
    qubits: tuple
    param_slot: int

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise InvalidParameterError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind == "RZZ" else 1
        if len(self.qubits) != arity or len(set(self.qubits)) != arity:
            raise InvalidParameterError(f"{self.kind} needs {arity} distinct qubits, got {self.qubits}")

    @property
    def diagonal(self) -> bool:
        return self.kind != "RX"


@dataclass(frozen=True)
class Layer:
    gates: tuple
    noise: tuple


@dataclass(frozen=True, eq=False)
class NoisyAnsatz:
    """Circuit structure plus its current parameters.

    Parameters are never mutated; ``with_params`` returns a new ansatz.
    ``lam`` is the shared depolarizing level of every noise marker.
    """

    n_qubits: int
    n_layers: int
    layers: tuple
    binding: str
    theta: np.ndarray
    lam: float
    lambda_min: float = LAMBDA_MIN

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.size != self.n_params:
            raise InvalidParameterError(f"theta has {theta.size} entries, circuit has {self.n_params} slots")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if not self.lambda_min <= self.lam <= 1.0:
            raise InvalidParameterError(f"lambda {self.lam} outside [{self.lambda_min}, 1]")

    @property
    def gates(self) -> list:
        return [g for layer in self.layers for g in layer.gates]

    @property
    def n_params(self) -> int:
        return max((g.param_slot for g in self.gates), default=-1) + 1

    @property
    def slot_of_gate(self) -> np.ndarray:
        return np.array([g.param_slot for g in self.gates], dtype=int)

    def gate_angles(self, theta: np.ndarray = None) -> np.ndarray:
        """Angle of every gate in circuit order, read through the binding."""
        theta = self.theta if theta is None else np.asarray(theta, dtype=float)
        return theta[self.slot_of_gate]

    def with_params(self, theta: np.ndarray = None, lam: float = None) -> "NoisyAnsatz":
        return dataclasses.replace(
            self,
            theta=self.theta if theta is None else theta,
            lam=self.lam if lam is None else float(lam),
        )

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_layers": self.n_layers,
            "binding": self.binding,
            "theta": [float(t) for t in self.theta],
            "lambda": float(self.lam),
            "lambda_min": float(self.lambda_min),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoisyAnsatz":
        a = build_ansatz(
            int(d["n_qubits"]), int(d["n_layers"]), d["binding"],
            float(d["lambda"]), lambda_min=float(d.get("lambda_min", LAMBDA_MIN)),
        )
        return a.with_params(theta=np.array(d["theta"], dtype=float))


def _layer_gates(n: int, binding: str, next_slot: int) -> tuple[tuple, int]:
    bonds = ring_bonds(n)
    specs = [("RZZ", b) for b in bonds] + [("RZ", (q,)) for q in range(n)] + [("RX", (q,)) for q in range(n)]
    gates = []
    if binding == "restricted":
        # one slot for the phase block (RZZ + RZ), one for the mixer (RX)
        for kind, qubits in specs:
            gates.append(GateSpec(kind, qubits, next_slot + (1 if kind == "RX" else 0)))
        return tuple(gates), next_slot + 2
    for kind, qubits in specs:
        gates.append(GateSpec(kind, qubits, next_slot))
        next_slot += 1
    return tuple(gates), next_slot


def build_ansatz(
    n: int,
    layers: Union[int, str] = "auto",
    binding: str = "restricted",
    lambda_init: float = 0.001,
    theta_seed: Optional[int] = 0,
    lambda_min: float = LAMBDA_MIN,
) -> NoisyAnsatz:
    """Build the noisy QAOA ansatz.

    Args:
        n: Number of qubits. Single-qubit circuits have no RZZ gates.
        layers: Layer count, or "auto" for ceil(n/2).
        binding: "restricted" ties every RZZ and RZ gate of a layer to one
            parameter and every RX gate to another; "flexible" gives each gate its own.
        lambda_init: Initial depolarizing level, within [lambda_min, 1].
        theta_seed: Seed of the uniform [0.0001, 0.05] initialization; None leaves theta at 0.
        lambda_min: Smallest reachable noise level.

    Raises:
        InvalidParameterError: For a bad qubit count, layer count, binding or lambda_init.
    """
    if n < 1:
        raise InvalidParameterError(f"need at least one qubit, got {n}")
    if binding not in BINDINGS:
        raise InvalidParameterError(f"unknown binding {binding!r}")
    m = math.ceil(n / 2) if layers == "auto" else int(layers)
    if m < 1:
        raise InvalidParameterError(f"need at least one layer, got {layers!r}")
    if not 0.0 <= lambda_min <= lambda_init <= 1.0:
        raise InvalidParameterError(f"lambda_init {lambda_init} outside [{lambda_min}, 1]")
    built, slot = [], 0
    for _ in range(m):
        gates, slot = _layer_gates(n, binding, slot)
        built.append(Layer(gates, tuple(range(n))))
    if theta_seed is None:
        theta = np.zeros(slot)
    else:
        theta = np.random.default_rng(theta_seed).uniform(*THETA_INIT_RANGE, size=slot)
    return NoisyAnsatz(n, m, tuple(built), binding, theta, float(lambda_init), float(lambda_min))


def to_flexible(a: NoisyAnsatz) -> NoisyAnsatz:
    """Untie a restricted ansatz: one slot per gate, holding the tied value."""
    flex = build_ansatz(a.n_qubits, a.n_layers, "flexible", a.lam, None, a.lambda_min)
    return flex.with_params(theta=a.gate_angles())


def _z_diagonal(qubits: tuple, n: int) -> np.ndarray:
    # +-1 diagonal of Z on the given qubits
    idx = np.arange(1 << n)
    parity = np.zeros(1 << n, dtype=int)
    for q in qubits:
        parity ^= (idx >> (n - 1 - q)) & 1
    return 1.0 - 2.0 * parity


def rx_matrix(angle: float) -> np.ndarray:
    return math.cos(angle) * PAULIS["I"] - 1j * math.sin(angle) * PAULIS["X"]


def layer_unitary_from_angles(a: NoisyAnsatz, layer: int, angles: np.ndarray) -> np.ndarray:
    """Unitary of one layer given the per-gate angles of that layer, in gate order."""
    n = a.n_qubits
    u = np.eye(1 << n, dtype=complex)
    for gate, angle in zip(a.layers[layer].gates, angles):
        if gate.diagonal:
            u = np.exp(-1j * angle * _z_diagonal(gate.qubits, n))[:, None] * u
        else:
            t = u.reshape([2] * n + [1 << n])
            u = apply_local(t, rx_matrix(angle), gate.qubits[0]).reshape(1 << n, 1 << n)
    return u


def layer_angle_slices(a: NoisyAnsatz) -> list:
    """Slice of the circuit-order gate list belonging to each layer."""
    out, start = [], 0
    for layer in a.layers:
        out.append(slice(start, start + len(layer.gates)))
        start += len(layer.gates)
    return out


def layer_unitary(a: NoisyAnsatz, layer: int) -> np.ndarray:
    """Unitary of layer ``layer``: the product of its gates in layer order."""
    if not 0 <= layer < a.n_layers:
        raise InvalidParameterError(f"layer {layer} out of range for {a.n_layers} layers")
    angles = a.gate_angles()[layer_angle_slices(a)[layer]]
    return layer_unitary_from_angles(a, layer, angles)


def circuit_unitary(a: NoisyAnsatz) -> np.ndarray:
    """Product of all layer unitaries, ignoring the noise."""
    u = np.eye(1 << a.n_qubits, dtype=complex)
    for layer in range(a.n_layers):
        u = layer_unitary(a, layer) @ u
    return u


def clamp_lambda(a: NoisyAnsatz, value: float) -> float:
    return float(min(max(value, a.lambda_min), 1.0))
