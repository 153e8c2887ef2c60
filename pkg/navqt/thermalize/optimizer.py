"""Gradient machinery and training loops.

Two trainers are registered under ``trainers.navqt.io``:

* ``approx`` (``train``) descends the approximate free energy E - S~/beta,
  with theta gradients from the parameter-shift rule, the lambda gradient of E
  from finite differences and the lambda gradient of S~ in closed form.
* ``true_fe`` (``train_true_free_energy``) descends E - S/beta of the exact
  output state, every derivative taken by central finite differences.

Both evaluate the iterate, record its metrics and then update it; no early
stopping. The iterate with the lowest cost seen is reported as ``final``.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from navqt.core import common as c
from navqt.core.errors import GuardError, InvalidParameterError, NonFiniteGradientError
from navqt.core.model import ExperimentConfig, IterMetrics, Iterate, RunRecord
from navqt.quantum.ansatz import NoisyAnsatz, build_ansatz
from navqt.quantum.hamiltonian import PauliHamiltonian, materialize, resolve
from navqt.quantum.simulator import evolve_exact, simulate_exact
from navqt.quantum.thermo import (
    ThermoParams,
    energy,
    fidelity,
    free_energy,
    thermal_state,
    von_neumann_entropy,
)

logger = logging.getLogger(__name__)

SHIFT = math.pi / 4
LOG_EVERY = 100
# entropy gradient is evaluated no lower than this when lambda_min is 0
GRAD_LAMBDA_FLOOR = 1e-8
MAX_SCAN_POINTS = 1_000_000

Sink = Callable[[dict], None]


@dataclass(frozen=True)
class GradReport:
    grad_theta: np.ndarray
    grad_lambda_energy: float
    grad_lambda_entropy: float

    def grad_lambda(self, beta: float) -> float:
        """Derivative of the free energy in lambda."""
        return self.grad_lambda_energy - self.grad_lambda_entropy / beta

    @property
    def finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.grad_theta))
            and math.isfinite(self.grad_lambda_energy)
            and math.isfinite(self.grad_lambda_entropy)
        )


@dataclass(frozen=True, eq=False)
class OptState:
    """Parameters and learning rates between two updates.

    ``history`` holds one ``IterMetrics`` per completed update, so its length
    always equals ``iter``.
    """

    theta: np.ndarray
    lam: float
    eta_theta: float
    eta_lambda: float
    lambda_min: float = 1e-8
    iter: int = 0
    history: tuple = ()

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if not self.lambda_min <= self.lam <= 1.0:
            raise InvalidParameterError(f"lambda {self.lam} outside [{self.lambda_min}, 1]")
        if len(self.history) != self.iter:
            raise InvalidParameterError(f"history has {len(self.history)} entries at iteration {self.iter}")

    @classmethod
    def initial(cls, a: NoisyAnsatz, config: ExperimentConfig) -> "OptState":
        return cls(a.theta, a.lam, config.eta_theta, config.eta_lambda, a.lambda_min)

    def clamp(self, lam: float) -> float:
        return float(min(max(lam, self.lambda_min), 1.0))

    def advance(self, theta: np.ndarray, lam: float, metrics: IterMetrics) -> "OptState":
        return dataclasses.replace(
            self, theta=theta, lam=self.clamp(lam), iter=self.iter + 1,
            history=self.history + (metrics,),
        )


def _pmap(fn, items, workers: int) -> list:
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def energy_grad_theta(a: NoisyAnsatz, h: PauliHamiltonian, backend, workers: int = 1) -> np.ndarray:
    """Parameter-shift gradient of the energy in every theta slot.

    Every gate is shifted by +-pi/4 on its own and its difference
    E(+) - E(-) is added to the slot it reads, so tied gates sum up.
    The depolarizing channels do not depend on theta and leave the rule exact.
    """
    hm = materialize(h)
    angles = a.gate_angles()
    slots = a.slot_of_gate

    def shifted(g: int) -> float:
        up, down = angles.copy(), angles.copy()
        up[g] += SHIFT
        down[g] -= SHIFT
        return backend.expectation(a, hm, angles=up) - backend.expectation(a, hm, angles=down)

    diffs = _pmap(shifted, range(angles.size), workers)
    grad = np.zeros(a.n_params)
    for slot, d in zip(slots, diffs):
        grad[slot] += d
    return grad


def lambda_derivative(f: Callable[[float], float], lam: float, lo: float, hi: float, h_fd: float) -> float:
    """Central difference of ``f`` at ``lam``, one-sided where lam +- h leaves [lo, hi].

    Raises:
        InvalidParameterError: If h_fd <= 0 or the interval is narrower than h_fd.
    """
    if not h_fd > 0:
        raise InvalidParameterError(f"finite-difference step must be positive, got {h_fd}")
    if lam - h_fd >= lo and lam + h_fd <= hi:
        return (f(lam + h_fd) - f(lam - h_fd)) / (2 * h_fd)
    if lam - h_fd >= lo:
        return (f(lam) - f(lam - h_fd)) / h_fd
    if lam + h_fd <= hi:
        return (f(lam + h_fd) - f(lam)) / h_fd
    raise InvalidParameterError(f"lambda interval [{lo}, {hi}] narrower than step {h_fd}")


def energy_grad_lambda(a: NoisyAnsatz, h: PauliHamiltonian, backend, h_fd: float = 1e-4) -> float:
    """Finite-difference derivative of the energy in lambda."""
    hm = materialize(h)
    return lambda_derivative(lambda lam: backend.expectation(a, hm, lam=lam), a.lam, a.lambda_min, 1.0, h_fd)


def _check_finite(s: OptState, report: GradReport, values: dict):
    if report.finite and all(math.isfinite(v) for v in values.values()):
        return
    diagnostic = {
        "iter": s.iter,
        "lambda": s.lam,
        "theta": [float(t) for t in s.theta],
        "grad_theta": [float(g) for g in report.grad_theta],
        "grad_lambda_energy": report.grad_lambda_energy,
        "grad_lambda_entropy": report.grad_lambda_entropy,
        **values,
    }
    raise NonFiniteGradientError(f"non-finite value at iteration {s.iter}", diagnostic)


def navqt_step(
    s: OptState,
    a: NoisyAnsatz,
    h: PauliHamiltonian,
    beta: float,
    backend,
    target=None,
    h_fd: float = 1e-4,
    workers: int = 1,
) -> OptState:
    """One descent step on the approximate free energy.

    Measures E, S~ and F~ at the current parameters, then applies
    theta <- theta - eta_theta dE/dtheta and
    lambda <- clamp(lambda - eta_lambda (dE/dlambda - dS~/dlambda / beta)).

    Args:
        s: Current state; its theta and lambda override those of ``a``.
        a: Circuit structure.
        h: Hamiltonian.
        beta: Inverse temperature.
        backend: Backend, already bound to this iteration.
        target: Gibbs state; when given the fidelity of the exact output to it is recorded.
        h_fd: Finite-difference step of the lambda derivative.
        workers: Threads for the shifted evaluations.

    Raises:
        NonFiniteGradientError: If any measured value or gradient is NaN or infinite.
    """
    a = a.with_params(s.theta, s.lam)
    thermo = ThermoParams(beta, a.n_qubits, a.n_layers)
    e = backend.expectation(a, materialize(h))
    entropy = thermo.entropy(s.lam)
    cost = free_energy(e, entropy, beta)
    fid = fidelity(simulate_exact(a), target) if target is not None else None
    if s.eta_lambda != 0:
        g_e = energy_grad_lambda(a, h, backend, h_fd)
        g_s = thermo.entropy_grad(max(s.lam, GRAD_LAMBDA_FLOOR))
    else:
        g_e = g_s = 0.0
    report = GradReport(energy_grad_theta(a, h, backend, workers), g_e, g_s)
    _check_finite(s, report, {"energy": e, "free_energy": cost})
    metrics = IterMetrics(s.iter, e, entropy, cost, s.lam, fid)
    return s.advance(
        s.theta - s.eta_theta * report.grad_theta,
        s.lam - s.eta_lambda * report.grad_lambda(beta),
        metrics,
    )


def true_free_energy_step(
    s: OptState,
    a: NoisyAnsatz,
    h: PauliHamiltonian,
    beta: float,
    target=None,
    theta_fd: float = 1e-5,
    lambda_fd: float = 1e-4,
) -> OptState:
    """One descent step on E - S/beta of the exact output state.

    Theta slots and lambda are all differentiated by central differences;
    energy and entropy are differentiated separately in lambda.
    """
    a = a.with_params(s.theta, s.lam)
    slots = a.slot_of_gate

    def parts(theta: np.ndarray, lam: float) -> tuple[float, float]:
        rho = evolve_exact(a, theta[slots], lam)
        return energy(rho, h), von_neumann_entropy(rho)

    e, entropy = parts(s.theta, s.lam)
    cost = free_energy(e, entropy, beta)
    grad = np.zeros(a.n_params)
    for k in range(a.n_params):
        up, down = s.theta.copy(), s.theta.copy()
        up[k] += theta_fd
        down[k] -= theta_fd
        grad[k] = (free_energy(*parts(up, s.lam), beta) - free_energy(*parts(down, s.lam), beta)) / (2 * theta_fd)
    if s.eta_lambda != 0:
        g_e = lambda_derivative(lambda lam: parts(s.theta, lam)[0], s.lam, a.lambda_min, 1.0, lambda_fd)
        g_s = lambda_derivative(lambda lam: parts(s.theta, lam)[1], s.lam, a.lambda_min, 1.0, lambda_fd)
    else:
        g_e = g_s = 0.0
    report = GradReport(grad, g_e, g_s)
    _check_finite(s, report, {"energy": e, "free_energy": cost})
    fid = fidelity(simulate_exact(a), target) if target is not None else None
    metrics = IterMetrics(s.iter, e, entropy, cost, s.lam, fid)
    return s.advance(
        s.theta - s.eta_theta * report.grad_theta,
        s.lam - s.eta_lambda * report.grad_lambda(beta),
        metrics,
    )


def hamiltonian_for(config: ExperimentConfig) -> PauliHamiltonian:
    """The embedded instance of a config, or the one its model and coefficients resolve to."""
    if config.hamiltonian:
        return PauliHamiltonian.from_dict(config.hamiltonian)
    return resolve(config.model, config.coeffs, config.n_qubits, c.konfig("grid")["hamiltonian_seeds"])


def backend_for(config: ExperimentConfig):
    return c.load_function("backends.navqt.io", config.backend).from_config(config)


def ansatz_for(config: ExperimentConfig) -> NoisyAnsatz:
    return build_ansatz(
        config.n_qubits, config.layers, config.binding, config.lambda_init,
        config.theta_seed, config.lambda_min,
    )


def warm_start(a: NoisyAnsatz, h: PauliHamiltonian, backend, iters: int, eta_theta: float, first_index: int = 0) -> NoisyAnsatz:
    """Energy-only descent in theta at lambda_min; lambda is restored afterwards."""
    low = a.with_params(lam=a.lambda_min)
    for i in range(iters):
        grad = energy_grad_theta(low, h, backend.for_iteration(first_index + i))
        low = low.with_params(theta=low.theta - eta_theta * grad)
    return a.with_params(theta=low.theta)


def _measure_approx(config: ExperimentConfig, a: NoisyAnsatz, h: PauliHamiltonian, backend) -> tuple:
    e = backend.expectation(a, materialize(h))
    entropy = ThermoParams(config.beta, a.n_qubits, a.n_layers).entropy(a.lam)
    return e, entropy, free_energy(e, entropy, config.beta)


def _measure_true(config: ExperimentConfig, a: NoisyAnsatz, h: PauliHamiltonian, backend) -> tuple:
    rho = simulate_exact(a)
    e, entropy = energy(rho, h), von_neumann_entropy(rho)
    return e, entropy, free_energy(e, entropy, config.beta)


def _iterate(index: int, a: NoisyAnsatz, measured: tuple, target) -> Iterate:
    e, entropy, cost = measured
    return Iterate(
        iter=index, lam=float(a.lam), theta=tuple(float(t) for t in a.theta),
        energy=e, entropy=entropy, free_energy=cost,
        fidelity=fidelity(simulate_exact(a), target),
    )


def _run(config: ExperimentConfig, step, measure, sink: Optional[Sink], workers: int) -> RunRecord:
    started = time.perf_counter()
    h = hamiltonian_for(config)
    a = ansatz_for(config)
    backend = backend_for(config)
    target = thermal_state(h, config.beta)
    tracked = target if config.track_fidelity else None
    if config.warm_start_iters:
        a = warm_start(a, h, backend, config.warm_start_iters, config.eta_theta, config.max_iters + 1)
    logger.info("starting %s (%d iterations, %s backend)", config.name, config.max_iters, config.backend)

    s = OptState.initial(a, config)
    best_at, best_params = None, None
    for _ in range(config.max_iters):
        params = (s.theta, s.lam)
        s = step(s, a, h, config.beta, backend.for_iteration(s.iter), tracked, config, workers)
        m = s.history[-1]
        if sink is not None:
            sink(m.to_dict())
        if best_at is None or m.free_energy < s.history[best_at].free_energy:
            best_at, best_params = m.iter, params
        if m.iter % LOG_EVERY == 0:
            logger.debug("%s iter %d: E=%.6g S=%.6g F=%.6g lambda=%.3g", config.name, m.iter, m.energy, m.entropy, m.free_energy, m.lam)

    last_a = a.with_params(s.theta, s.lam)
    last = _iterate(s.iter, last_a, measure(config, last_a, h, backend.for_iteration(s.iter)), target)
    if best_at is None or last.free_energy < s.history[best_at].free_energy:
        final = last
    else:
        m = s.history[best_at]
        best_a = a.with_params(*best_params)
        final = _iterate(best_at, best_a, (m.energy, m.entropy, m.free_energy), target)

    h_doc = h.to_dict()
    record = RunRecord(
        config=config.with_overrides(hamiltonian=h_doc),
        hamiltonian=h_doc,
        history=s.history,
        final=final,
        last=last,
        wall_time=time.perf_counter() - started,
    )
    logger.info(
        "finished %s: fidelity %.4f lambda %.3g free energy %.6g (iter %d)",
        config.name, final.fidelity, final.lam, final.free_energy, final.iter,
    )
    return record


def _approx_step(s, a, h, beta, backend, target, config, workers):
    return navqt_step(s, a, h, beta, backend, target, config.lambda_fd, workers)


def _true_step(s, a, h, beta, backend, target, config, workers):
    return true_free_energy_step(s, a, h, beta, target, config.theta_fd, config.lambda_fd)


def train(config: ExperimentConfig, sink: Optional[Sink] = None, workers: int = 1) -> RunRecord:
    """Train the noisy ansatz on the approximate free energy.

    Args:
        config: The experiment.
        sink: Called with each iteration's metrics as a dictionary, for streaming.
        workers: Threads for the shifted evaluations of one step.

    Returns:
        The run record; ``final`` is the lowest-cost iterate, ``last`` the one the loop ended on.
    """
    return _run(config, _approx_step, _measure_approx, sink, workers)


def train_true_free_energy(config: ExperimentConfig, sink: Optional[Sink] = None, workers: int = 1) -> RunRecord:
    """Train on the exact free energy of the output state, with finite-difference gradients."""
    if config.backend != "exact":
        raise InvalidParameterError("true free-energy training needs the exact backend")
    return _run(config, _true_step, _measure_true, sink, workers)


def grid_scan(
    h: PauliHamiltonian,
    beta: float,
    layers="auto",
    points: int = 5,
    lambda_points: Optional[int] = None,
    lambda_min: float = 1e-8,
) -> Iterate:
    """Brute-force scan of a restricted ansatz on the exact free energy.

    Every theta slot takes ``points`` values spaced over [0, pi), one period of
    exp(-i theta P) up to a global phase, and lambda takes ``lambda_points``
    values over [lambda_min, 1].

    Returns:
        The grid point with the lowest free energy, as an iterate numbered by scan order.

    Raises:
        GuardError: If the grid has more than a million points.
    """
    a = build_ansatz(h.n_qubits, layers, "restricted", 1.0, None, lambda_min)
    lambda_points = points if lambda_points is None else lambda_points
    total = points ** a.n_params * lambda_points
    if total > MAX_SCAN_POINTS:
        raise GuardError(f"scan of {total} points exceeds {MAX_SCAN_POINTS}")
    thetas = np.linspace(0.0, math.pi, points, endpoint=False)
    lams = np.linspace(lambda_min, 1.0, lambda_points)
    slots = a.slot_of_gate
    best = None
    for index, (lam, theta) in enumerate(itertools.product(lams, itertools.product(thetas, repeat=a.n_params))):
        theta = np.array(theta)
        rho = evolve_exact(a, theta[slots], float(lam))
        e, entropy = energy(rho, h), von_neumann_entropy(rho)
        cost = free_energy(e, entropy, beta)
        if best is None or cost < best[0]:
            best = (cost, index, theta, float(lam), e, entropy)
    cost, index, theta, lam, e, entropy = best
    best_a = a.with_params(theta, lam)
    logger.info("scanned %d points, best free energy %.6g at lambda %.3g", total, cost, lam)
    return Iterate(
        iter=index, lam=lam, theta=tuple(float(t) for t in theta), energy=e, entropy=entropy,
        free_energy=cost, fidelity=fidelity(simulate_exact(best_a), thermal_state(h, beta)),
    )
