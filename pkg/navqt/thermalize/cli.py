#!/usr/bin/env python3
"""navqt - noise-assisted thermal state preparation

Commands:
  run       Train one experiment
  grid      Hyperparameter grid search at one beta
  sweep     Grid search at every beta of the sweep
  thermal   Exact Gibbs state diagnostics for a model and beta
  report    Aggregate run records into summary tables
  survey    True versus approximate circuit entropy over a lambda grid
  scan      Brute-force theta/lambda scan on the exact free energy
"""

import argparse
import logging
import sys

import numpy as np

from navqt.core import common as c
from navqt.core import files as f
from navqt.core.errors import NavqtError, fail
from navqt.core.model import BACKENDS, BINDINGS, COEFF_MODES, MODELS, MODES, ExperimentConfig
from navqt.quantum.hamiltonian import spectrum
from navqt.quantum.thermo import (
    energy,
    fidelity,
    log_partition,
    thermal_free_energy,
    thermal_state,
    von_neumann_entropy,
)
from navqt.thermalize import harness
from navqt.thermalize.optimizer import grid_scan, hamiltonian_for

logger = logging.getLogger(__name__)

# flag dest -> Experiment field
EXPERIMENT_FLAGS = (
    ("model", dict(choices=MODELS)),
    ("coeffs", dict(choices=COEFF_MODES)),
    ("n_qubits", dict(type=int, flags=("-n", "--n-qubits"))),
    ("beta", dict(type=float)),
    ("layers", dict(help="auto or a layer count")),
    ("binding", dict(choices=BINDINGS)),
    ("lambda_init", dict(type=float)),
    ("lambda_min", dict(type=float)),
    ("eta_theta", dict(type=float)),
    ("eta_lambda", dict(type=float)),
    ("theta_seed", dict(type=int)),
    ("max_iters", dict(type=int)),
    ("mode", dict(choices=MODES)),
    ("backend", dict(choices=BACKENDS)),
    ("trajectories", dict(type=int, flags=("-K", "--trajectories"))),
    ("trajectory_seed", dict(type=int)),
    ("out_dir", dict()),
)


def add_experiment_flags(parser):
    parser.add_argument('-c', '--config', help='Experiment yaml or json resource')
    for dest, opts in EXPERIMENT_FLAGS:
        opts = dict(opts)
        flags = opts.pop("flags", ("--" + dest.replace("_", "-"),))
        parser.add_argument(*flags, dest=dest, default=None, **opts)


def experiment_from_args(args) -> ExperimentConfig:
    """Packaged defaults, then the config file, then command line flags."""
    if args.config:
        resource = f.load_document(args.config)
        ExperimentConfig.check_envelope(resource)
    else:
        resource = c.konfig("experiment")
    if not isinstance(resource.get("spec"), dict):
        resource["spec"] = {}
    # a generated name is regenerated from the overridden fields; a custom one is kept
    if not args.config or ExperimentConfig.from_resource(resource).run_name is None:
        resource.setdefault("metadata", {}).pop("name", None)
    overrides = {dest: getattr(args, dest) for dest, _ in EXPERIMENT_FLAGS}
    resource = c.apply_patches(resource, c.override_patches(overrides))
    return ExperimentConfig.from_resource(resource)


def _grid(args) -> dict:
    grid = harness.grid_axes(smoke=args.smoke)
    if args.seeds:
        grid["theta_seed"] = list(args.seeds)
    return grid


def _shared(config: ExperimentConfig) -> dict:
    spec = config.body()
    for k in ("model", "coeffs", "n_qubits", "beta", "mode", "out_dir"):
        spec.pop(k)
    return spec


def cmd_run(args):
    config = experiment_from_args(args)
    record = harness.run_experiment(config.to_resource(), workers=args.workers)
    print(f.parse_to({"name": record.name, **record.final.to_dict()}, "json"), end="")


def cmd_grid(args):
    config = experiment_from_args(args)
    best = harness.grid_search(
        config.model, config.coeffs, config.n_qubits, config.beta, config.mode,
        config.out_dir, _grid(args), args.workers, _shared(config),
    )
    print(f.parse_to({"best": best.name, **best.final.to_dict()}, "json"), end="")


def cmd_sweep(args):
    config = experiment_from_args(args)
    rows = harness.beta_sweep(
        config.model, config.coeffs, config.n_qubits, config.mode, config.out_dir,
        args.betas, _grid(args), args.workers, _shared(config),
    )
    print(f.csv_text(harness.SWEEP_COLUMNS, rows), end="")


def cmd_thermal(args):
    config = experiment_from_args(args)
    h = hamiltonian_for(config)
    rho = thermal_state(h, config.beta)
    w = rho.eigenvalues()
    out = {
        "model": config.model,
        "coeffs": config.coeffs,
        "n_qubits": config.n_qubits,
        "beta": config.beta,
        "log_partition": log_partition(h, config.beta),
        "free_energy": thermal_free_energy(h, config.beta),
        "energy": energy(rho, h),
        "entropy": von_neumann_entropy(rho),
        "trace": float(np.trace(rho.matrix).real),
        "min_eigenvalue": float(w[0]),
        "self_fidelity": fidelity(rho, rho),
        "hamiltonian_spectrum": [float(x) for x in spectrum(h)[0]],
        "eigenvalues": [float(x) for x in w[::-1]],
    }
    print(f.parse_to(out, "json"), end="")


def cmd_report(args):
    summary = harness.report(args.out_dir)
    print(f.parse_to({k: summary[k] for k in ("n_records", "dips", "errors")}, "json"), end="")


def cmd_survey(args):
    config = experiment_from_args(args)
    rows = harness.entropy_survey(
        config.model, config.n_qubits, args.lambdas, config.layers, args.samples,
        config.theta_seed, config.coeffs, config.out_dir,
    )
    print(f.csv_text(harness.SURVEY_COLUMNS, rows), end="")


def cmd_scan(args):
    config = experiment_from_args(args)
    best = grid_scan(hamiltonian_for(config), config.beta, config.layers, args.points, lambda_min=config.lambda_min)
    print(f.parse_to(best.to_dict(), "json"), end="")


def build_parser():
    parser = argparse.ArgumentParser(
        prog='navqt',
        description='Noise-assisted variational preparation of thermal states'
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    parser.add_argument('-q', '--quiet', action='store_true', help='Warnings and errors only')
    subparsers = parser.add_subparsers(dest='command', help='Commands')

    run_parser = subparsers.add_parser('run', help='Train one experiment')
    add_experiment_flags(run_parser)
    run_parser.add_argument('--workers', type=int, default=1, help='Threads for the shifted evaluations')
    run_parser.set_defaults(func=cmd_run)

    for name, func, helptext in (
        ('grid', cmd_grid, 'Hyperparameter grid search at one beta'),
        ('sweep', cmd_sweep, 'Grid search at every beta of the sweep'),
    ):
        p = subparsers.add_parser(name, help=helptext)
        add_experiment_flags(p)
        p.add_argument('--workers', type=int, default=1, help='Parallel runs')
        p.add_argument('--seeds', type=int, nargs='+', help='Theta seeds of the grid')
        p.add_argument('--smoke', action='store_true', help='One seed and one learning-rate pair')
        if name == 'sweep':
            p.add_argument('--betas', type=float, nargs='+', help='Inverse temperatures (default: the packaged grid)')
        p.set_defaults(func=func)

    thermal_parser = subparsers.add_parser('thermal', help='Exact Gibbs state diagnostics')
    add_experiment_flags(thermal_parser)
    thermal_parser.set_defaults(func=cmd_thermal)

    report_parser = subparsers.add_parser('report', help='Aggregate run records')
    report_parser.add_argument('out_dir', help='Directory searched for run records')
    report_parser.set_defaults(func=cmd_report)

    survey_parser = subparsers.add_parser('survey', help='True versus approximate entropy')
    add_experiment_flags(survey_parser)
    survey_parser.add_argument('--lambdas', type=float, nargs='+', default=[0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99])
    survey_parser.add_argument('--samples', type=int, default=100, help='Random circuits per lambda')
    survey_parser.set_defaults(func=cmd_survey)

    scan_parser = subparsers.add_parser('scan', help='Brute-force scan on the exact free energy')
    add_experiment_flags(scan_parser)
    scan_parser.add_argument('--points', type=int, default=5, help='Grid points per axis')
    scan_parser.set_defaults(func=cmd_scan)
    return parser


def main(argv=None):
    """Main entry point for navqt"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 1

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    c.setup_logging(level)
    try:
        args.func(args)
    except (NavqtError, OSError) as exc:
        fail(str(exc))
    return 0


if __name__ == '__main__':
    sys.exit(main())
