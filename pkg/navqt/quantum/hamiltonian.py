"""Spin-chain Hamiltonians as sums of Pauli strings.

Three benchmark families live here: the classical Ising chain (IC), the
transverse-field Ising chain (TFI) and the Heisenberg chain, each with
uniform (all couplings 1) or random (standard normal) coefficients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from cachetools import LRUCache, cached

from navqt.core.errors import ConfigError, GuardError, InvalidParameterError
from navqt.quantum.qcore import pauli_string

logger = logging.getLogger(__name__)

# Coefficient symbols per model, in the order random draws are taken.
# Each entry is (symbol, pauli letter(s)); two letters mean a ring bond.
MODEL_TERMS = {
    "IC": (("J_z", "ZZ"), ("h_z", "Z")),
    "TFI": (("J_z", "ZZ"), ("h_z", "Z"), ("h_x", "X")),
    "Heisenberg": (("J_z", "ZZ"), ("J_x", "XX"), ("J_y", "YY"), ("h_x", "X")),
}

GAP_TOL = 1e-9
MAX_DENSE_QUBITS = 10


@dataclass(frozen=True)
class PauliString:
    ops: str
    coefficient: float

    def __post_init__(self):
        if any(o not in "IXYZ" for o in self.ops):
            raise InvalidParameterError(f"invalid Pauli string {self.ops!r}")
        if not np.isfinite(self.coefficient):
            raise InvalidParameterError(f"coefficient of {self.ops} is not finite")


@dataclass(frozen=True)
class PauliHamiltonian:
    """Weighted sum of Pauli strings with the provenance needed to rebuild it.

    ``coefficients`` holds the signed-positive model couplings per symbol
    (J_z, h_x, ...); the terms carry the leading minus sign of the models.
    """

    n_qubits: int
    terms: tuple
    model_tag: str = "custom"
    coeff_mode: str = "uniform"
    coeff_seed: int = 0
    coefficients: tuple = ()

    def __post_init__(self):
        for t in self.terms:
            if len(t.ops) != self.n_qubits:
                raise InvalidParameterError(f"term {t.ops} does not span {self.n_qubits} qubits")

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def coefficient_arrays(self) -> dict:
        return {k: list(v) for k, v in self.coefficients}

    def to_dict(self) -> dict:
        """Json document with everything needed to rebuild the instance."""
        return {
            "model": self.model_tag,
            "n_qubits": self.n_qubits,
            "coeff_mode": self.coeff_mode,
            "seed": self.coeff_seed,
            "coefficients": self.coefficient_arrays(),
            "terms": [{"ops": t.ops, "coefficient": t.coefficient} for t in self.terms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PauliHamiltonian":
        if d.get("model") in MODEL_TERMS:
            return build_model(
                d["model"], int(d["n_qubits"]), d.get("coeff_mode", "uniform"),
                int(d.get("seed", 0)), coefficients=d.get("coefficients"),
            )
        terms = tuple(PauliString(t["ops"], float(t["coefficient"])) for t in d.get("terms", []))
        return cls(int(d["n_qubits"]), terms, d.get("model", "custom"),
                   d.get("coeff_mode", "uniform"), int(d.get("seed", 0)))


def ring_bonds(n: int) -> list:
    """Nearest-neighbour bonds of a periodic chain; a single bond when n == 2."""
    if n < 2:
        return []
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def draw_coefficients(model: str, n: int, mode: str, seed: int) -> dict:
    """Model couplings per symbol.

    Random draws come from one PCG64 stream seeded with ``seed``, taken
    symbol by symbol in ``MODEL_TERMS`` order and site by site within a symbol.
    """
    if mode not in ("uniform", "random"):
        raise ConfigError(f"unknown coefficient mode {mode!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    out = {}
    for symbol, letters in MODEL_TERMS[model]:
        count = len(ring_bonds(n)) if len(letters) == 2 else n
        if mode == "uniform":
            out[symbol] = [1.0] * count
        else:
            out[symbol] = [float(x) for x in rng.standard_normal(count)]
    return out


def build_model(
    model: str,
    n: int,
    mode: str = "uniform",
    seed: int = 0,
    coefficients: dict = None,
) -> PauliHamiltonian:
    """Assemble one of the benchmark chains.

    Args:
        model: IC, TFI or Heisenberg.
        n: Number of spins, at least 2.
        mode: uniform or random.
        seed: Seed of the random coefficient stream.
        coefficients: Explicit couplings per symbol, overriding ``mode``/``seed``.

    Raises:
        InvalidParameterError: If n < 2.
        ConfigError: If the model is unknown.
    """
    if model not in MODEL_TERMS:
        raise ConfigError(f"unknown model {model!r}")
    if n < 2:
        raise InvalidParameterError(f"{model} chain needs at least 2 spins, got {n}")
    coeffs = coefficients or draw_coefficients(model, n, mode, seed)
    bonds = ring_bonds(n)
    terms = []
    for symbol, letters in MODEL_TERMS[model]:
        sites = bonds if len(letters) == 2 else [(i,) for i in range(n)]
        values = coeffs[symbol]
        if len(values) != len(sites):
            raise InvalidParameterError(f"{symbol} needs {len(sites)} values, got {len(values)}")
        for where, value in zip(sites, values):
            ops = ["I"] * n
            for q, letter in zip(where, letters):
                ops[q] = letter
            terms.append(PauliString("".join(ops), -float(value)))
    frozen = tuple((k, tuple(float(x) for x in coeffs[k])) for k, _ in MODEL_TERMS[model])
    return PauliHamiltonian(n, tuple(terms), model, mode, seed, frozen)


def build_ising(n: int, mode: str = "uniform", seed: int = 0) -> PauliHamiltonian:
    """H = -sum J_i Z_i Z_{i+1} - sum h_i Z_i on a ring."""
    return build_model("IC", n, mode, seed)


def build_tfi(n: int, mode: str = "uniform", seed: int = 0) -> PauliHamiltonian:
    """Ising ring plus a transverse field -sum h^X_i X_i."""
    return build_model("TFI", n, mode, seed)


def build_heisenberg(n: int, mode: str = "uniform", seed: int = 0) -> PauliHamiltonian:
    """ZZ, XX and YY ring couplings plus a field -sum h^X_i X_i."""
    return build_model("Heisenberg", n, mode, seed)


@cached(cache=LRUCache(maxsize=256))
def materialize(h: PauliHamiltonian) -> np.ndarray:
    """Dense matrix of the Hamiltonian. The returned array is shared and read-only."""
    m = np.zeros((h.dim, h.dim), dtype=complex)
    for t in h.terms:
        m += t.coefficient * pauli_string(t.ops)
    m.setflags(write=False)
    return m


@cached(cache=LRUCache(maxsize=256))
def spectrum(h: PauliHamiltonian) -> tuple:
    """Ascending eigenvalues and eigenvectors, both read-only and cached."""
    if h.n_qubits > MAX_DENSE_QUBITS:
        raise GuardError(f"dense spectrum limited to {MAX_DENSE_QUBITS} qubits")
    w, v = scipy.linalg.eigh(materialize(h))
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def spectral_gap(h: PauliHamiltonian) -> float:
    """Distance from the lowest eigenvalue to the next distinct one, 0 if there is none."""
    w, _ = spectrum(h)
    above = w[w > w[0] + GAP_TOL]
    return float(above[0] - w[0]) if above.size else 0.0


def select_hardest(n: int, model: str, seeds: Sequence[int] = (0, 1, 2, 3, 4)) -> PauliHamiltonian:
    """Random-coefficient instance with the smallest spectral gap; ties go to the lowest seed."""
    if len(seeds) != 5:
        raise InvalidParameterError(f"expected 5 seeds, got {len(seeds)}")
    candidates = [(spectral_gap(h), seed, h) for seed in seeds for h in [build_model(model, n, "random", seed)]]
    gap, seed, best = min(candidates, key=lambda c: (c[0], c[1]))
    logger.debug("hardest %s n=%d: seed %d gap %.6g", model, n, seed, gap)
    return best


def resolve(model: str, coeffs: str, n: int, seeds: Iterable[int] = (0, 1, 2, 3, 4)) -> PauliHamiltonian:
    """The instance an experiment runs on: uniform, or the hardest of the random seeds."""
    if coeffs == "uniform":
        return build_model(model, n, "uniform")
    return select_hardest(n, model, list(seeds))
