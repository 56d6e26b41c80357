"""Self-test oracles run by ``actopt check``.

Each check returns a :class:`CheckResult`; none of them reuses the code path
it verifies for its reference value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beam import ModalBasis, ModalSystem, assemble_system
from .lqr import closed_loop_sim, solve_dre, trajectory_cost
from .shape import ActuatorShape, Grid, input_vector, measure, shape_from_intervals
from .topo import ShapeProblem


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def tanh_oracle(steps=(500, 1000, 2000, 4000), tau=5.0):
    """RK4 Riccati error against pi(t) = tanh(tau - t) for a' = u, cost a^2 + u^2.

    Returns the max abs errors per step count and the observed orders.
    """
    system = ModalSystem([[0.0]], [1.0], [[1.0]])
    errors = []
    for n in steps:
        sol = solve_dre(system, 1.0, tau, n)
        errors.append(float(np.max(np.abs(sol.matrices[:, 0, 0] - np.tanh(tau - sol.times)))))
    orders = [float(np.log2(a / b)) for a, b in zip(errors, errors[1:])]
    return errors, orders


def check_tanh(max_error=1e-6, order=4.0, order_tol=0.3):
    errors, orders = tanh_oracle()
    ok = errors[0] < max_error and all(abs(o - order) <= order_tol for o in orders)
    detail = (f"error@500={errors[0]:.3e}; ratios="
              + ", ".join(f"{2 ** o:.2f}" for o in orders)
              + "; orders=" + ", ".join(f"{o:.3f}" for o in orders))
    return CheckResult("riccati tanh oracle", ok, detail)


def cost_identity(params, shape, z0, n_steps, method="decoupled"):
    """Relative gap between Z0' Pi(0) Z0 and the quadrature of the running cost."""
    basis = ModalBasis.create(params.n_modes)
    system = assemble_system(params, input_vector(shape, basis))
    sol = solve_dre(system, params.control_penalty, params.horizon, n_steps, method=method)
    value = float(z0 @ sol.pi0 @ z0)
    traj = closed_loop_sim(system, sol, z0)
    integral = trajectory_cost(traj, system, params.control_penalty)
    return value, integral, abs(value - integral) / value


def check_cost_identity(params, shape, z0, n_steps, tol=1e-3):
    value, integral, rel = cost_identity(params, shape, z0, n_steps)
    return CheckResult("cost identity", rel < tol,
                       f"Z0'Pi0Z0={value:.10g}, quadrature={integral:.10g}, rel={rel:.2e}")


def gradient_fd(params, grid, intervals, z0, n_steps, n_samples=24, seed=0,
                rel_floor=1e-3, flip_sign=False):
    """Compare single-cell flips of the actuator with the topological gradient.

    For each sampled cell j (with |g_j| > rel_floor * max|g|) the prediction
    is h g_j when the cell is added and -h g_j when it is removed.

    Returns (cells, predicted, observed).
    """
    problem = ShapeProblem(params, grid, z0, n_steps)
    shape = shape_from_intervals(intervals, grid)
    base = problem.cost(shape)
    g = problem.gradient(shape)
    if flip_sign:
        g = -g
    eligible = np.flatnonzero(np.abs(g) > rel_floor * np.max(np.abs(g)))
    rng = np.random.default_rng(seed)
    cells = np.sort(rng.choice(eligible, size=min(n_samples, eligible.size), replace=False))
    h = grid.cell_width
    predicted, observed = [], []
    for j in cells:
        mask = shape.cells.copy()
        mask[j] = not mask[j]
        observed.append(problem.cost(ActuatorShape(mask, grid)) - base)
        predicted.append(h * g[j] * (-1.0 if shape.cells[j] else 1.0))
    return cells, np.array(predicted), np.array(observed)


def check_gradient(params, grid, intervals, z0, n_steps, flip_sign=False,
                   min_agree=0.95, ratio_range=(0.5, 2.0)):
    cells, pred, obs = gradient_fd(params, grid, intervals, z0, n_steps, flip_sign=flip_sign)
    agree = float(np.mean(np.sign(pred) == np.sign(obs)))
    ratio = np.abs(obs / pred)
    in_range = bool(np.all((ratio >= ratio_range[0]) & (ratio <= ratio_range[1])))
    ok = len(cells) >= 20 and agree >= min_agree and in_range
    return CheckResult(
        "topological gradient vs finite differences", ok,
        f"{len(cells)} cells at M={grid.n_cells}, sign agreement {agree:.0%}, "
        f"|dJ/(h g)| in [{ratio.min():.3f}, {ratio.max():.3f}]")


def gradient_asymmetry(params, grid, z0, n_steps, intervals=((0.1, 0.9),)):
    """max |g(x) - g(1 - x)| / max |g| for a mirror-symmetric actuator."""
    problem = ShapeProblem(params, grid, z0, n_steps)
    g = problem.gradient(shape_from_intervals(intervals, grid))
    return float(np.max(np.abs(g - g[::-1])) / np.max(np.abs(g)))


def check_symmetry(params, grid, z0, n_steps, tol=1e-8):
    asym = gradient_asymmetry(params, grid, z0, n_steps)
    return CheckResult("gradient mirror symmetry", asym < tol, f"relative asymmetry {asym:.2e}")


def run_all(cfg, flip_gradient_sign=False, fd_cells=400):
    """Run every oracle for a resolved RunConfig; returns a list of results."""
    params = cfg.beam_params()
    grid = cfg.grid()
    z0 = cfg.initial_state()
    shape = shape_from_intervals(cfg.actuator, grid)
    if measure(shape) == 0:
        raise ValueError("configured actuator covers no cell")
    fd_grid = Grid(fd_cells)
    return [
        check_tanh(),
        check_cost_identity(params, shape, z0, cfg.n_steps),
        check_gradient(params, fd_grid, cfg.actuator, z0, cfg.n_steps,
                       flip_sign=flip_gradient_sign),
        check_symmetry(params, grid, z0, cfg.n_steps),
    ]
