"""Command-line front end: ``actopt optimize|simulate|sweep|check``.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure,
3 failed self-check.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import checks
from .beam import ModalBasis, assemble_system, displacement_field, h_norm_sq, velocity_field
from .config import ConfigError, load_config, replace_config
from .lqr import (
    RiccatiError,
    closed_loop_sim,
    kalman_gain,
    open_loop_sim,
    optimal_cost,
    solve_dre,
    trajectory_cost,
    write_field_csv,
    write_trajectory_csv,
)
from .shape import (
    count_components,
    input_vector,
    levelset_from_intervals,
    measure,
    read_shape_csv,
    shape_from_intervals,
    write_shape_csv,
)
from .topo import EmptyShapeError, LineSearchError, continuation, write_history_csv

log = logging.getLogger("actopt")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _prepare_out(out_dir, cfg):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved_config"), "w") as fh:
        fh.write(cfg.dumps())


def _solve(cfg, shape, params=None):
    params = params or cfg.beam_params()
    basis = ModalBasis.create(params.n_modes)
    system = assemble_system(params, input_vector(shape, basis))
    sol = solve_dre(system, params.control_penalty, params.horizon, cfg.n_steps,
                    method=cfg.dre_method)
    return system, sol


def run_optimize(cfg, out_dir):
    """Penalty continuation from the configured actuator; writes CSV results."""
    grid = cfg.grid()
    params = cfg.beam_params()
    z0 = cfg.initial_state()
    psi0 = levelset_from_intervals(cfg.actuator, grid)
    result = continuation(params, cfg.optimizer_config(), psi0, z0)
    final = replace(params, volume_penalty=cfg.alpha_schedule[-1])
    system, sol = _solve(cfg, result.shape, final)
    gain = kalman_gain(sol, system, final.control_penalty)
    cost = optimal_cost(sol, z0, final.volume_penalty, measure(result.shape), final.volume_target)

    _prepare_out(out_dir, cfg)
    write_history_csv(os.path.join(out_dir, "history.csv"), result.history)
    write_shape_csv(os.path.join(out_dir, "shape.csv"), result.shape, result.levelset)
    summary = [cost, measure(result.shape), count_components(result.shape),
               float(np.linalg.norm(gain)), result.n_accepted, result.status]
    _write_rows(os.path.join(out_dir, "summary.csv"),
                ["cost", "volume", "n_components", "gain_norm", "n_accepted", "status"],
                [summary])
    return result, summary


def _load_shape(cfg):
    if cfg.shape_file:
        if not os.path.exists(cfg.shape_file):
            raise FileNotFoundError(f"shape file {cfg.shape_file!r} not found")
        shape, _ = read_shape_csv(cfg.shape_file)
        if shape.grid != cfg.grid():
            raise ConfigError("shape_file", f"shape has {shape.grid.n_cells} cells, "
                              f"config n_cells={cfg.n_cells}")
        return shape
    return shape_from_intervals(cfg.actuator, cfg.grid())


def run_simulate(cfg, out_dir):
    """Closed loop for the chosen actuator, the comparison actuator and no control."""
    shape = _load_shape(cfg)
    params = cfg.beam_params()
    basis = ModalBasis.create(params.n_modes)
    grid = cfg.grid()
    z0 = cfg.initial_state()
    gamma = params.control_penalty

    rows = []
    trajectories = {}
    for label, s in (("actuator", shape),
                     ("compare", shape_from_intervals(cfg.compare_actuator, grid))):
        system, sol = _solve(cfg, s, params)
        traj = closed_loop_sim(system, sol, z0)
        trajectories[label] = traj
        rows.append([label, float(z0 @ sol.pi0 @ z0), trajectory_cost(traj, system, gamma),
                     float(np.max(np.abs(traj.control))),
                     float(h_norm_sq(traj.state[-1], basis)), measure(s), count_components(s)])
    system, _ = _solve(cfg, shape, params)
    free = open_loop_sim(system, z0, params.horizon, cfg.n_steps)
    rows.append(["open_loop", np.nan, trajectory_cost(free, system, gamma), 0.0,
                 float(h_norm_sq(free.state[-1], basis)), 0.0, 0])

    _prepare_out(out_dir, cfg)
    traj = trajectories["actuator"]
    stride = cfg.trajectory_stride
    write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), traj, stride)
    write_trajectory_csv(os.path.join(out_dir, "compare_trajectory.csv"),
                         trajectories["compare"], stride)
    write_trajectory_csv(os.path.join(out_dir, "open_loop.csv"), free, stride)
    idx = np.unique(np.linspace(0, len(traj.times) - 1, cfg.snapshot_count).round().astype(int))
    x = grid.centers
    write_field_csv(os.path.join(out_dir, "displacement.csv"), traj.times[idx],
                    displacement_field(traj.state[idx], basis, x), x)
    write_field_csv(os.path.join(out_dir, "velocity.csv"), traj.times[idx],
                    velocity_field(traj.state[idx], basis, x), x)
    write_field_csv(os.path.join(out_dir, "open_loop_displacement.csv"), free.times[idx],
                    displacement_field(free.state[idx], basis, x), x)
    _write_rows(os.path.join(out_dir, "comparison.csv"),
                ["label", "riccati_cost", "quadrature_cost", "max_abs_u", "final_energy",
                 "volume", "n_components"], rows)
    return rows


def _sweep_one(cfg, n_modes, cd, out_dir):
    run_cfg = replace_config(cfg, n_modes=n_modes, kelvin_voigt=cd)
    sub = os.path.join(out_dir, f"run_N{n_modes}_Cd{cd:g}")
    result, summary = run_optimize(run_cfg, sub)
    cost, volume, comps, gain = summary[:4]
    return [n_modes, cd, gain, cost, volume, comps]


def run_sweep(cfg, out_dir, jobs=1):
    """Continuation for every (N, C_d) pair; one subdirectory per run."""
    if not cfg.sweep_modes or not cfg.sweep_kelvin_voigt:
        raise ConfigError("sweep_modes", "sweep lists must be non-empty")
    pairs = [(n, cd) for cd in cfg.sweep_kelvin_voigt for n in cfg.sweep_modes]
    _prepare_out(out_dir, cfg)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, [cfg] * len(pairs), *zip(*pairs),
                                 [out_dir] * len(pairs)))
    else:
        rows = [_sweep_one(cfg, n, cd, out_dir) for n, cd in pairs]
    _write_rows(os.path.join(out_dir, "sweep.csv"),
                ["N", "C_d", "gain_norm", "cost", "volume", "n_components"], rows)
    return rows


def build_parser():
    parser = argparse.ArgumentParser(
        prog="actopt", description="LQR-optimal actuator shapes for a damped beam")
    parser.add_argument("command", choices=["optimize", "simulate", "sweep", "check"])
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one configuration key")
    parser.add_argument("--jobs", type=int, default=1, help="parallel runs for sweep")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--inject-fault", choices=["gradient-sign"], help=argparse.SUPPRESS)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "optimize":
            _, summary = run_optimize(cfg, args.out)
            print("cost={:.10g} volume={:.4f} components={} gain_norm={:.6g}".format(*summary[:4]))
        elif args.command == "simulate":
            for row in run_simulate(cfg, args.out):
                print("{}: cost={:.10g} max|u|={:.6g} final_energy={:.4g}".format(
                    row[0], row[2], row[3], row[4]))
        elif args.command == "sweep":
            for row in run_sweep(cfg, args.out, args.jobs):
                print("N={} C_d={:g} gain_norm={:.6g} cost={:.6g} volume={:.4f} components={}"
                      .format(*row))
        else:
            results = checks.run_all(cfg, flip_gradient_sign=args.inject_fault == "gradient-sign")
            for r in results:
                print(r.line())
            if not all(r.passed for r in results):
                return EXIT_CHECK
    except (RiccatiError, LineSearchError, EmptyShapeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
