"""Experiment orchestration.

Layout of an output directory::

    <out>/runs/<run>.json     RunRecord resource
    <out>/runs/<run>.csv      per-iteration metrics
    <out>/manifest.json       grid axes, runs, best run
    <out>/sweep.csv           one row per beta (beta_sweep only; grids sit in <out>/beta-<b>/)
    <out>/summary.json, *_vs_beta.csv, learning_curves.csv   (report)
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Optional, Sequence

import jmespath
import numpy as np

from navqt.core import common as c
from navqt.core import files as f
from navqt.core.errors import ConfigError, NavqtError
from navqt.core.model import METRIC_COLUMNS, ExperimentConfig, RunRecord
from navqt.quantum.ansatz import build_ansatz, circuit_unitary
from navqt.quantum.hamiltonian import materialize, resolve
from navqt.quantum.qcore import DensityMatrix
from navqt.quantum.simulator import simulate_exact
from navqt.quantum.thermo import approx_entropy, energy, von_neumann_entropy
from navqt.thermalize.optimizer import hamiltonian_for

logger = logging.getLogger(__name__)

GRID_AXES = ("binding", "lambda_init", "eta_theta", "eta_lambda", "theta_seed")
SWEEP_COLUMNS = ["beta", "best_fidelity", "best_lambda", "best_free_energy", "n_runs"]
GROUP_KEYS = ["model", "coeffs", "n_qubits", "mode", "beta"]
REPORT_FILES = ("summary.json", "manifest.json")
LOWER_BOUND_TOL = 1e-9

# fields a report needs from a RunRecord resource
RECORD_QUERY = jmespath.compile(
    "{name: metadata.name,"
    " model: spec.config.spec.model, coeffs: spec.config.spec.coeffs,"
    " n_qubits: spec.config.spec.n_qubits, mode: spec.config.spec.mode,"
    " beta: spec.config.spec.beta,"
    " fidelity: spec.final.fidelity, lambda: spec.final.lambda,"
    " free_energy: spec.final.free_energy, history: spec.history}"
)


def grid_axes(smoke: bool = False) -> dict:
    """Hyperparameter grid from the packaged konfig; the smoke grid has one seed and one eta pair."""
    return dict(c.konfig("grid")["smoke" if smoke else "grid"])


def default_betas() -> list:
    return list(c.konfig("grid")["betas"])


def expand_grid(base: ExperimentConfig, grid: dict) -> list:
    """Every combination of the grid axes, applied to ``base`` as json patches.

    Axes are crossed in ``GRID_AXES`` order with the last axis varying fastest.

    Raises:
        ConfigError: If the grid names a field that is not a grid axis.
    """
    unknown = set(grid) - set(GRID_AXES)
    if unknown:
        raise ConfigError(f"Unknown grid axes: {sorted(unknown)}")
    axes = [a for a in GRID_AXES if a in grid]
    resource = base.to_resource()
    configs = []
    for values in itertools.product(*(grid[a] for a in axes)):
        patched = c.apply_patches(resource, c.override_patches(dict(zip(axes, values))))
        configs.append(ExperimentConfig.from_spec(patched["spec"]))
    return configs


def record_path(out_dir, name: str) -> Path:
    return Path(out_dir) / "runs" / f"{name}.json"


def run_experiment(resource: dict, workers: int = 1) -> RunRecord:
    """Train one Experiment resource and persist its record and metrics.

    Module level so it can be shipped to a process pool.
    """
    config = ExperimentConfig.from_resource(resource)
    trainer = c.load_function("trainers.navqt.io", config.mode)
    path = record_path(config.out_dir, config.name)
    with f.CsvStream(path.with_suffix(".csv"), METRIC_COLUMNS) as stream:
        record = trainer(config, sink=stream.write, workers=workers)
    f.write_json(path, record.to_resource())
    logger.info("wrote %s", path)
    return record


def select_best(records: Iterable[RunRecord]) -> RunRecord:
    """Lowest final free energy; ties go to the higher fidelity, then the smaller run name."""
    records = list(records)
    if not records:
        raise NavqtError("no records to select from")
    return min(records, key=lambda r: (r.final_free_energy, -r.final_fidelity, r.name))


def _execute(configs: Sequence[ExperimentConfig], workers: int) -> tuple[list, list]:
    resources = [cfg.to_resource() for cfg in configs]
    done, failed = [], []
    if workers <= 1:
        outcomes = []
        for res in resources:
            try:
                outcomes.append(run_experiment(res))
            except Exception as exc:
                outcomes.append(exc)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_experiment, res) for res in resources]
            outcomes = []
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as exc:
                    outcomes.append(exc)
    for cfg, out in zip(configs, outcomes):
        if isinstance(out, Exception):
            logger.error("run %s aborted: %s: %s", cfg.name, type(out).__name__, out)
            failed.append({"name": cfg.name, "error": str(out)})
        else:
            done.append(out)
    return done, failed


def _base_config(model, coeffs, n, beta, mode, out_dir, overrides: Optional[dict]) -> ExperimentConfig:
    spec = {**ExperimentConfig.defaults(), **(overrides or {})}
    spec.update(model=model, coeffs=coeffs, n_qubits=n, beta=beta, mode=mode, out_dir=str(out_dir))
    if mode == "true_fe":
        spec["backend"] = "exact"
    base = ExperimentConfig.from_spec(spec)
    if base.hamiltonian is None:
        base = base.with_overrides(hamiltonian=hamiltonian_for(base).to_dict())
    return base


def grid_search(
    model: str,
    coeffs: str,
    n: int,
    beta: float,
    mode: str,
    out_dir,
    grid: Optional[dict] = None,
    workers: int = 1,
    overrides: Optional[dict] = None,
) -> RunRecord:
    """Run every grid combination for one (model, N, beta) and return the best run.

    Every record is persisted under ``out_dir/runs`` and listed in
    ``out_dir/manifest.json`` together with the grid axes and the best run.

    Args:
        model: IC, TFI or Heisenberg.
        coeffs: uniform or random; random instances are resolved once and embedded.
        n: Number of qubits.
        beta: Inverse temperature.
        mode: approx or true_fe.
        out_dir: Output directory.
        grid: Axis values; defaults to the full packaged grid (120 runs).
        workers: Process pool size; 1 runs in process.
        overrides: Other Experiment fields shared by every run.

    Raises:
        NavqtError: If any run aborted. The manifest is written first.
    """
    grid = grid_axes() if grid is None else grid
    base = _base_config(model, coeffs, n, beta, mode, out_dir, overrides)
    configs = expand_grid(base, grid)
    logger.info("grid %s n=%d beta=%g %s: %d runs", model, n, beta, mode, len(configs))
    done, failed = _execute(configs, workers)
    best = select_best(done) if done else None
    manifest = c.new_resource_object("Manifest", f"{model.lower()}-{coeffs}-n{n}-b{beta:g}-{mode}", {
        "axes": grid,
        "runs": [{"name": cfg.name, "file": str(record_path(".", cfg.name))} for cfg in configs],
        "best": best.name if best else None,
        "failed": failed,
    })
    f.write_json(Path(out_dir) / "manifest.json", manifest)
    if failed:
        raise NavqtError(f"{len(failed)} of {len(configs)} runs aborted")
    return best


def beta_sweep(
    model: str,
    coeffs: str,
    n: int,
    mode: str,
    out_dir,
    betas: Optional[Sequence[float]] = None,
    grid: Optional[dict] = None,
    workers: int = 1,
    overrides: Optional[dict] = None,
) -> list:
    """Grid search at every beta; writes ``sweep.csv`` and returns its rows."""
    betas = default_betas() if betas is None else list(betas)
    grid = grid_axes() if grid is None else grid
    overrides = dict(overrides or {})
    if not overrides.get("hamiltonian"):
        h = resolve(model, coeffs, n, c.konfig("grid")["hamiltonian_seeds"])
        overrides["hamiltonian"] = h.to_dict()
    n_runs = math.prod(len(grid[a]) for a in grid)
    rows = []
    for beta in betas:
        best = grid_search(model, coeffs, n, beta, mode, Path(out_dir) / f"beta-{beta:g}", grid, workers, overrides)
        rows.append({
            "beta": float(beta),
            "best_fidelity": best.final_fidelity,
            "best_lambda": best.final_lambda,
            "best_free_energy": best.final_free_energy,
            "n_runs": n_runs,
        })
        logger.info("beta %g: fidelity %.4f lambda %.3g", beta, best.final_fidelity, best.final_lambda)
    path = f.write_csv(Path(out_dir) / "sweep.csv", SWEEP_COLUMNS, rows)
    logger.info("wrote %s", path)
    return rows


def _load_records(out_dir: Path) -> tuple[list, list]:
    entries, errors = [], []
    for path in sorted(out_dir.rglob("*.json")):
        if path.name in REPORT_FILES:
            continue
        rel = path.relative_to(out_dir).as_posix()
        try:
            doc = f.read_json(path)
            if not isinstance(doc, dict) or doc.get("kind") != RunRecord.kind:
                raise ConfigError(f"not a {RunRecord.kind} resource")
            RunRecord.from_resource(doc)
        except (ValueError, OSError) as exc:
            logger.warning("skipping corrupt record %s: %s", rel, exc)
            errors.append({"file": rel, "error": str(exc)})
            continue
        entry = RECORD_QUERY.search(doc)
        entry["file"] = rel
        entries.append(entry)
    return entries, errors


def _group_key(e: dict) -> tuple:
    return tuple(e[k] for k in GROUP_KEYS)


def _series_key(e: dict) -> tuple:
    return (e["model"], e["coeffs"], e["n_qubits"], e["mode"])


def intermediate_dips(groups: list) -> list:
    """Per series, the interior beta with the lowest best fidelity and whether it undercuts both ends."""
    out = []
    for key, members in itertools.groupby(groups, key=_series_key):
        members = sorted(members, key=lambda g: g["beta"])
        if len(members) < 3:
            continue
        interior = min(members[1:-1], key=lambda g: (g["best_fidelity"], g["beta"]))
        dip = bool(interior["best_fidelity"] < min(members[0]["best_fidelity"], members[-1]["best_fidelity"]))
        row = dict(zip(GROUP_KEYS[:-1], key))
        row.update({
            "beta": interior["beta"],
            "min_fidelity": interior["best_fidelity"],
            "low_beta_fidelity": members[0]["best_fidelity"],
            "high_beta_fidelity": members[-1]["best_fidelity"],
            "interior_dip": dip,
        })
        logger.info("%s: lowest interior fidelity %.4f at beta %g (dip: %s)", "/".join(map(str, key)), row["min_fidelity"], row["beta"], dip)
        out.append(row)
    return out


def report(out_dir) -> dict:
    """Aggregate every RunRecord below ``out_dir``.

    Writes ``summary.json``, ``fidelity_vs_beta.csv``, ``lambda_vs_beta.csv``
    and ``learning_curves.csv`` (history of the best run of each group).
    Corrupt files are listed under ``errors`` and never abort. Output is a
    pure function of the records, so reruns are byte-identical.
    """
    out_dir = Path(out_dir)
    entries, errors = _load_records(out_dir) if out_dir.is_dir() else ([], [])
    if not entries:
        logger.warning("no run records under %s", out_dir)
    groups, curves = [], []
    for key, members in itertools.groupby(sorted(entries, key=_group_key), key=_group_key):
        members = list(members)
        best = min(members, key=lambda e: (e["free_energy"], -e["fidelity"], e["name"]))
        groups.append({
            **dict(zip(GROUP_KEYS, key)),
            "best_run": best["name"],
            "best_fidelity": best["fidelity"],
            "best_lambda": best["lambda"],
            "best_free_energy": best["free_energy"],
            "n_runs": len(members),
        })
        for m in best["history"]:
            curves.append({**dict(zip(GROUP_KEYS, key)), "run": best["name"], **m})
    summary = {
        "n_records": len(entries),
        "groups": groups,
        "dips": intermediate_dips(groups),
        "errors": errors,
    }
    f.write_json(out_dir / "summary.json", summary)
    f.write_csv(out_dir / "fidelity_vs_beta.csv", GROUP_KEYS + ["best_fidelity", "n_runs"], groups)
    f.write_csv(out_dir / "lambda_vs_beta.csv", GROUP_KEYS + ["best_lambda"], groups)
    f.write_csv(out_dir / "learning_curves.csv", GROUP_KEYS + ["run"] + METRIC_COLUMNS, curves)
    logger.info("report of %d records written to %s", len(entries), out_dir)
    return summary


SURVEY_COLUMNS = [
    "lambda", "approx_entropy", "entropy_mean", "entropy_min", "entropy_max",
    "energy_mean", "noise_first_energy_mean", "violations", "samples",
]


def noise_first_state(a, lam: float) -> DensityMatrix:
    """All depolarizing noise moved in front of the unitaries: U (rho_1 x ... x rho_1) U^dagger."""
    big = 1.0 - (1.0 - lam) ** a.n_layers
    one = np.array([1.0 - 0.5 * big, 0.5 * big])
    diag = one
    for _ in range(a.n_qubits - 1):
        diag = np.kron(diag, one)
    u = circuit_unitary(a)
    return DensityMatrix((u * diag) @ u.conj().T, a.n_qubits)


def entropy_survey(
    model: str,
    n: int,
    lambdas: Sequence[float],
    layers="auto",
    samples: int = 100,
    seed: int = 0,
    coeffs: str = "uniform",
    out_dir=None,
) -> list:
    """Compare the true circuit entropy and energy against the noise-first approximation.

    For each lambda, ``samples`` restricted ansatze with theta uniform on
    [0, pi) are simulated exactly. A sample whose entropy falls below the
    approximate entropy by more than 1e-9 counts as a violation and is logged.
    """
    h = resolve(model, coeffs, n, c.konfig("grid")["hamiltonian_seeds"])
    hm = materialize(h)
    rng = np.random.default_rng(seed)
    rows = []
    for lam in lambdas:
        a = build_ansatz(n, layers, "restricted", float(lam), None, 0.0)
        approx = approx_entropy(float(lam), a.n_layers, n)
        entropies, energies, nf_energies, violations = [], [], [], 0
        for _ in range(samples):
            sample = a.with_params(theta=rng.uniform(0.0, math.pi, a.n_params))
            rho = simulate_exact(sample)
            s = von_neumann_entropy(rho)
            if s < approx - LOWER_BOUND_TOL:
                violations += 1
            entropies.append(s)
            energies.append(energy(rho, hm))
            nf_energies.append(energy(noise_first_state(sample, float(lam)), hm))
        if violations:
            logger.warning("lambda %g: %d of %d samples below the approximate entropy", lam, violations, samples)
        rows.append({
            "lambda": float(lam),
            "approx_entropy": approx,
            "entropy_mean": float(np.mean(entropies)),
            "entropy_min": float(np.min(entropies)),
            "entropy_max": float(np.max(entropies)),
            "energy_mean": float(np.mean(energies)),
            "noise_first_energy_mean": float(np.mean(nf_energies)),
            "violations": violations,
            "samples": samples,
        })
    if out_dir is not None:
        f.write_csv(Path(out_dir) / "survey.csv", SURVEY_COLUMNS, rows)
    return rows
