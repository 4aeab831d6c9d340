"""Command-line interface.

    qpmp solve CONFIG [--out DIR] [--seed INT]
    qpmp propagate CONFIG [--table]
    qpmp fidelity MATRIX MATRIX

Exit status: 0 on success, 1 for configuration or input errors, 2 for
numerical failures.
"""
from __future__ import annotations

import argparse
import ast
import csv
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import pmp, pure
from .config import ConfigError, load_config
from .dynamics import TimeGrid, propagate
from .errors import DomainError, NumericalError
from .quantum import check_density, fidelity, is_pure
from .spin import SpinModel

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _fmt(x):
    return repr(float(x))


def _matrix_columns(name, n):
    cols = []
    for i in range(n):
        for j in range(n):
            cols += [f"{name}_{i}{j}_re", f"{name}_{i}{j}_im"]
    return cols


def _matrix_cells(m):
    cells = []
    for z in np.asarray(m).ravel():
        cells += [_fmt(z.real), _fmt(z.imag)]
    return cells


def write_trajectory(path, record):
    """One row per grid node: t, u, rho entries (row-major), Hamiltonian value.

    ``u`` and ``hamiltonian`` are empty on the final node t = 1.
    """
    grid = record.grid
    n = record.states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "u"] + _matrix_columns("rho", n) + ["hamiltonian"])
        for k, t in enumerate(grid.nodes):
            last = k == grid.n_steps
            u = "" if last else _fmt(record.controls.u[k])
            h = "" if last else _fmt(record.hamiltonian_values[k])
            w.writerow([k, _fmt(t), u] + _matrix_cells(record.states[k]) + [h])


def write_convergence(path, result):
    """One row per iteration; iteration 0 is the initial control."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "fidelity", "max_du", "d_omega", "d_phi", "omega", "phi",
                    "relaxation", "accepted"])
        fid0 = result.trajectory.fidelity_history[0]
        first = result.history[0] if result.history else None
        w.writerow([0, _fmt(fid0), "", "", "", "", "", _fmt(first.relaxation) if first else "", 1])
        for r in result.history:
            w.writerow([r.iteration, _fmt(r.fidelity), _fmt(r.max_du), _fmt(r.d_omega), _fmt(r.d_phi),
                        _fmt(r.omega), _fmt(r.phi), _fmt(r.relaxation), int(r.accepted)])


def write_pure_trajectory(path, result, n_steps):
    grid = TimeGrid(n_steps)
    n = result.states.shape[1]
    cols = []
    for i in range(n):
        cols += [f"psi_{i}_re", f"psi_{i}_im"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "u"] + cols)
        for k, t in enumerate(grid.nodes):
            u = "" if k == n_steps else _fmt(result.u[k])
            cells = []
            for z in result.states[k]:
                cells += [_fmt(z.real), _fmt(z.imag)]
            w.writerow([k, _fmt(t), u] + cells)


def write_pure_convergence(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "cost", "relaxation"])
        for i, (c, eta) in enumerate(zip(result.cost_history, result.relaxation_history)):
            w.writerow([i, _fmt(c), _fmt(eta)])


def _leading_vector(rho, name):
    if not is_pure(rho):
        raise ConfigError("the pure-state baseline needs a pure state", name)
    lam, vec = np.linalg.eigh(rho)
    v = vec[:, -1]
    # fix the arbitrary eigenvector phase: first nonzero entry real positive
    i = int(np.argmax(np.abs(v) > 1e-12))
    return v * np.exp(-1j * np.angle(v[i]))


def build_pure_problem(cfg):
    rho0, sigma = cfg.matrices()
    model = SpinModel(cfg.spin)
    omega = cfg.spin.omega0 if cfg.solver.init_omega is None else cfg.solver.init_omega
    problem = pure.from_model(model, omega, cfg.solver.init_phi,
                              _leading_vector(rho0, "rho0"), _leading_vector(sigma, "sigma"))
    if cfg.pure.target_phase == "auto":
        return pure.align_target_phase(problem, np.full(cfg.solver.n_steps, np.pi))
    phase = np.exp(1j * float(cfg.pure.target_phase))
    return pure.PureProblem(problem.drift, problem.control, problem.psi0, phase * problem.psi_target)


def run(cfg, out_dir):
    """Execute the configured solvers and write the output files into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"seed": cfg.seed, "config": cfg.to_dict()}
    rho0, sigma = cfg.matrices()

    if cfg.method in ("pmp", "both"):
        problem = pmp.ControlProblem(rho0, sigma, SpinModel(cfg.spin))
        start = time.perf_counter()
        try:
            result = pmp.solve(problem, cfg.solver, seed=cfg.seed)
        except NumericalError as exc:
            raise NumericalError(f"pmp solver: {exc}") from exc
        wall = time.perf_counter() - start
        write_trajectory(out / "trajectory.csv", result.trajectory)
        write_convergence(out / "convergence.csv", result)
        summary["pmp"] = {
            "final_fidelity": result.final_fidelity,
            "iterations": result.iterations,
            "converged": result.converged,
            "wall_time_s": wall,
            "omega": result.control.omega,
            "phi": result.control.phi,
            "relaxation_halvings": result.relaxation_halvings,
        }

    if cfg.method in ("pure-baseline", "both"):
        problem = build_pure_problem(cfg)
        start = time.perf_counter()
        try:
            result = pure.solve_pure(problem, cfg.pure.weights(), cfg.pure.config(cfg.solver.n_steps))
        except NumericalError as exc:
            raise NumericalError(f"pure-state baseline: {exc}") from exc
        wall = time.perf_counter() - start
        write_pure_trajectory(out / "pure_trajectory.csv", result, cfg.solver.n_steps)
        write_pure_convergence(out / "pure_convergence.csv", result)
        summary["pure"] = {
            "final_fidelity": result.fidelity,
            "final_cost": result.cost_history[-1],
            "iterations": result.iterations,
            "converged": result.converged,
            "law_residual": result.residual,
            "wall_time_s": wall,
            "relaxation_halvings": result.relaxation_halvings,
        }

    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def parse_matrix(text):
    """Read a matrix literal such as ``[[0.5, 0.5j], [-0.5j, 0.5]]``."""
    try:
        value = ast.literal_eval(text)
        m = np.array(value, dtype=complex)
    except (ValueError, SyntaxError, TypeError) as exc:
        raise DomainError(f"cannot parse matrix literal {text!r}") from exc
    return m


def _cmd_solve(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out = args.out if args.out is not None else cfg.output
    summary = run(cfg, out)
    for key in ("pmp", "pure"):
        if key in summary:
            s = summary[key]
            print(f"{key}: fidelity={s['final_fidelity']:.10f} iterations={s['iterations']} "
                  f"converged={s['converged']}")
    print(f"wrote {out}")


def _cmd_propagate(args):
    cfg = load_config(args.config)
    rho0, sigma = cfg.matrices()
    problem = pmp.ControlProblem(rho0, sigma, SpinModel(cfg.spin))
    control = pmp.initial_control(problem, cfg.solver, seed=cfg.seed)
    grid = TimeGrid(cfg.solver.n_steps)
    hs = problem.model.hamiltonian(control.u, control.omega, control.phi, grid.points)
    states = propagate(hs, problem.rho0, grid, cfg.solver.propagator)
    if args.table:
        w = csv.writer(sys.stdout, lineterminator="\n")
        n = states.shape[1]
        w.writerow(["k", "t"] + [f"population_{i}" for i in range(n)])
        for k, t in enumerate(grid.nodes):
            w.writerow([k, _fmt(t)] + [_fmt(np.real(states[k][i, i])) for i in range(n)])
    final = states[-1]
    for i in range(final.shape[0]):
        print(f"population_{i} {np.real(final[i, i]):.12f}")
    print(f"fidelity {fidelity(0.5 * (final + final.conj().T), problem.sigma, check=False):.12f}")


def _cmd_fidelity(args):
    rho = check_density(parse_matrix(args.rho), "first matrix")
    sigma = check_density(parse_matrix(args.sigma), "second matrix")
    print(f"{fidelity(rho, sigma):.12g}")


def build_parser():
    parser = argparse.ArgumentParser(prog="qpmp", description="Fidelity-maximizing quantum control.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the configured solver(s) and write output tables")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: the config's 'output')")
    p.add_argument("--seed", type=int, help="override the config's random seed")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("propagate", help="propagate the initial control without optimizing")
    p.add_argument("config")
    p.add_argument("--table", action="store_true", help="print populations at every grid node")
    p.set_defaults(func=_cmd_propagate)

    p = sub.add_parser("fidelity", help="Uhlmann-Jozsa fidelity of two density matrices")
    p.add_argument("rho")
    p.add_argument("sigma")
    p.set_defaults(func=_cmd_fidelity)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"error [input]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"error [numerical]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
