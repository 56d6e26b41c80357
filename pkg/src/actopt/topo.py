"""Topological gradient and the level-set actuator optimizer.

The level set is moved by the convex combination

    psi <- (1 - beta) psi + beta g / ||g||,

where g is the topological gradient of the penalized LQR cost.  A trial step
is kept only if it lowers the cost; otherwise beta is shrunk.  The penalty
weight alpha is raised in stages (continuation), each stage warm-started from
the previous level set.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .beam import ModalBasis, assemble_system
from .lqr import closed_loop_sim, optimal_cost, solve_dre
from .shape import (
    LevelSet,
    count_components,
    input_vector,
    measure,
    shape_from_levelset,
    signed_distance_reinit,
    symmetric_difference,
)

log = logging.getLogger(__name__)


class EmptyShapeError(ValueError):
    """The current actuator covers no cell, so there is nothing to control with."""


class LineSearchError(RuntimeError):
    """beta fell below its floor before any step was accepted."""


@dataclass(frozen=True)
class OptimizerConfig:
    beta0: float = 0.5
    beta_min: float = 1e-6
    beta_shrink: float = 0.5
    beta_grow: float = 1.2
    stop_eps: float = 1e-7
    reinit_period: int = 20
    max_iters: int = 500
    alpha_schedule: tuple = (0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0)
    n_steps: int = 64000
    dre_method: str = "decoupled"

    def __post_init__(self):
        object.__setattr__(self, "alpha_schedule", tuple(float(a) for a in self.alpha_schedule))
        if not 0 < self.beta_min < self.beta0 <= 1:
            raise ValueError("need 0 < beta_min < beta0 <= 1")
        if not 0 < self.beta_shrink < 1:
            raise ValueError("beta_shrink must lie in (0, 1)")
        if self.beta_grow < 1:
            raise ValueError("beta_grow must be >= 1")
        if self.reinit_period < 1 or self.max_iters < 0 or self.n_steps < 1:
            raise ValueError("reinit_period, n_steps must be >= 1 and max_iters >= 0")
        sched = self.alpha_schedule
        if not sched or any(a < 0 for a in sched) or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("alpha_schedule must be non-empty, non-negative and strictly increasing")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    alpha: float
    beta: float
    cost: float
    volume: float
    n_components: int


@dataclass
class OptimizationResult:
    shape: object
    levelset: LevelSet
    history: list
    status: str
    n_accepted: int = 0
    stages: list = field(default_factory=list)


class ShapeProblem:
    """Cost and gradient of the penalized LQR functional for one alpha.

    The most recent Riccati solution is cached so that the gradient of an
    accepted shape reuses the solve done for its cost.
    """

    def __init__(self, params, grid, z0, n_steps=64000, dre_method="decoupled"):
        self.params = params
        self.grid = grid
        self.basis = ModalBasis.create(params.n_modes)
        self.z0 = np.asarray(z0, dtype=float)
        self.n_steps = n_steps
        self.dre_method = dre_method
        self._cache = None

    def solve(self, shape):
        if self._cache is not None and self._cache[0] == shape:
            return self._cache[1], self._cache[2]
        system = assemble_system(self.params, input_vector(shape, self.basis))
        riccati = solve_dre(system, self.params.control_penalty, self.params.horizon,
                            self.n_steps, method=self.dre_method)
        self._cache = (shape, system, riccati)
        return system, riccati

    def cost(self, shape):
        _, riccati = self.solve(shape)
        p = self.params
        return optimal_cost(riccati, self.z0, p.volume_penalty, measure(shape), p.volume_target)

    def trajectory(self, shape):
        system, riccati = self.solve(shape)
        return closed_loop_sim(system, riccati, self.z0)

    def gradient(self, shape):
        p = self.params
        return topological_gradient(self.trajectory(shape), self.basis, self.grid,
                                    p.volume_penalty, measure(shape), p.volume_target)


def topological_gradient(traj, basis, grid, alpha, vol, c):
    """Per-cell sensitivity of the penalized cost to adding actuator material.

    With p(x, t) = sum_n q_n(t) phi_n(x) built from the adjoint coefficients
    q_n (velocity block of 2 Pi Z),

        g(x) = int_0^tau u(t) p(x, t) dt + 2 alpha (vol - c).

    Adding a cell of width h around x changes the cost by about h g(x);
    removing it changes the cost by about -h g(x).  The time integral uses
    the trapezoidal rule on the trajectory grid.
    """
    weights = np.trapezoid(traj.control[:, None] * traj.adjoint_coeffs, traj.times, axis=0)
    return weights @ basis.evaluate(grid.centers) + 2.0 * alpha * (vol - c)


def gradient_norm(g, grid):
    """Grid-weighted L2(0, 1) norm."""
    return float(np.sqrt(grid.cell_width * np.sum(np.asarray(g) ** 2)))


def check_stationarity(g, shape, tol):
    """True when g <= tol on the actuator and g >= -tol off it."""
    g = np.asarray(g, dtype=float)
    inside = shape.cells
    return bool(np.all(g[inside] <= tol) and np.all(g[~inside] >= -tol))


def levelset_step(psi, g, beta, norm=None):
    if norm is None:
        norm = gradient_norm(g, psi.grid)
    if norm == 0:
        raise ZeroDivisionError("zero topological gradient: the shape is stationary")
    return LevelSet((1.0 - beta) * psi.values + beta * np.asarray(g) / norm, psi.grid)


def _first_flip(psi, direction):
    """Smallest beta at which (1 - beta) psi + beta direction changes a cell.

    Returns None when no cell would ever change membership.
    """
    v = psi.values
    inside = v < 0
    flips = np.where(inside, direction >= 0, direction < 0)
    if not np.any(flips):
        return None
    v, d = v[flips], direction[flips]
    thresholds = v / (v - d)
    beta = float(np.min(thresholds))
    # nudge past the crossing, accounting for the psi == 0 -> outside rule
    return min(1.0, beta * (1.0 + 1e-9) + 1e-15)


def _record(it, alpha, beta, cost, shape):
    return IterationRecord(it, alpha, beta, cost, measure(shape), count_components(shape))


def optimize_shape(params, config, psi0, z0, start_iter=0, problem=None):
    """Run the level-set line-search iteration at a fixed volume penalty.

    Each outer iteration evaluates the gradient of the current shape and
    tries steps psi_trial = (1 - beta) psi + beta g/||g||.  A trial is
    accepted when its cost is strictly lower, after which beta grows by
    ``beta_grow`` (capped at 1); otherwise beta shrinks by ``beta_shrink``.
    The level set is reinitialized to a signed distance every
    ``reinit_period`` accepted steps.

    Stops when a trial leaves the shape unchanged (up to ``stop_eps`` in
    measure), when beta drops below ``beta_min``, or after ``max_iters``
    accepted steps.

    Raises:
        EmptyShapeError: ``psi0`` induces an empty actuator.
        LineSearchError: beta underflowed before any step was accepted.
    """
    grid = psi0.grid
    if problem is None:
        problem = ShapeProblem(params, grid, z0, config.n_steps, config.dre_method)
    alpha = params.volume_penalty
    psi = psi0
    shape = shape_from_levelset(psi)
    if measure(shape) == 0:
        raise EmptyShapeError("initial level set induces an empty actuator")
    cost = problem.cost(shape)
    beta = config.beta0
    history = [_record(start_iter, alpha, beta, cost, shape)]
    accepted = 0
    status = "max_iters"

    while accepted < config.max_iters:
        g = problem.gradient(shape)
        norm = gradient_norm(g, grid)
        if norm == 0:
            status = "stationary"
            break
        minimal_tried = False
        while True:
            trial = levelset_step(psi, g, beta, norm)
            trial_shape = shape_from_levelset(trial)
            if symmetric_difference(trial_shape, shape) < config.stop_eps:
                # step too short to move the interface: retry with the
                # smallest beta that flips a cell, once
                first = _first_flip(psi, g / norm)
                if minimal_tried or first is None or first > 1.0:
                    status = "converged"
                    break
                minimal_tried = True
                beta = first
                continue
            trial_cost = problem.cost(trial_shape) if measure(trial_shape) > 0 else np.inf
            if trial_cost < cost:
                break
            if minimal_tried:
                status = "converged"
                break
            beta *= config.beta_shrink
            if beta < config.beta_min:
                status = "step_underflow"
                break
        if status in ("converged", "step_underflow"):
            break
        accepted += 1
        psi, shape, cost = trial, trial_shape, trial_cost
        if accepted % config.reinit_period == 0:
            psi = signed_distance_reinit(psi)
        history.append(_record(start_iter + accepted, alpha, beta, cost, shape))
        log.info("alpha=%g iter=%d beta=%.3g cost=%.6g vol=%.4f comps=%d",
                 alpha, start_iter + accepted, beta, cost, measure(shape),
                 count_components(shape))
        beta = min(1.0, beta * config.beta_grow)

    if status == "step_underflow" and accepted == 0:
        raise LineSearchError(
            f"no descent step found at alpha={alpha:g}; start is stationary or badly scaled")
    return OptimizationResult(shape, psi, history, status, accepted)


def continuation(params, config, psi0, z0):
    """Optimize over the increasing penalty weights in ``config.alpha_schedule``.

    Stage k starts from the level set left by stage k-1 with beta reset to
    ``beta0``.  The returned history has the initial record followed by every
    accepted step of every stage.  A later stage that finds no descent step
    keeps its warm start.
    """
    psi = psi0
    history = []
    stages = []
    total = 0
    result = None
    for k, alpha in enumerate(config.alpha_schedule):
        stage_params = replace(params, volume_penalty=alpha)
        try:
            result = optimize_shape(stage_params, config, psi, z0, start_iter=total)
        except LineSearchError:
            if k == 0:
                raise
            log.info("alpha=%g: no descent step, keeping warm start", alpha)
            stages.append((alpha, "step_underflow", 0))
            continue
        history.extend(result.history if k == 0 else result.history[1:])
        stages.append((alpha, result.status, result.n_accepted))
        total += result.n_accepted
        psi = result.levelset
    shape = shape_from_levelset(psi)
    return OptimizationResult(shape, psi, history, result.status if result else "none",
                              total, stages)


HISTORY_COLUMNS = ["iter", "alpha", "beta", "cost", "volume", "n_components"]


def write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for r in history:
            w.writerow([r.iter, f"{r.alpha:.17g}", f"{r.beta:.17g}", f"{r.cost:.17g}",
                        f"{r.volume:.17g}", r.n_components])
