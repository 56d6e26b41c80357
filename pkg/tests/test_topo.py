from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actopt.beam import BeamParams, ModalBasis, project_initial_condition
from actopt.lqr import Trajectory
from actopt.shape import (
    ActuatorShape,
    Grid,
    LevelSet,
    levelset_from_intervals,
    measure,
    shape_from_intervals,
    shape_from_levelset,
)
from actopt.topo import (
    HISTORY_COLUMNS,
    EmptyShapeError,
    OptimizerConfig,
    ShapeProblem,
    _first_flip,
    check_stationarity,
    continuation,
    gradient_norm,
    levelset_step,
    optimize_shape,
    topological_gradient,
    write_history_csv,
)

SMALL = BeamParams(n_modes=10)
SMALL_STEPS = 16000


def sin3(n, grid):
    basis = ModalBasis.create(n)
    return project_initial_condition(lambda x: np.sin(3 * np.pi * x), np.zeros(n), basis, grid)


def fake_traj(n, control, adjoint):
    times = np.linspace(0.0, 1.0, 11)
    return Trajectory(times, np.zeros((11, 2 * n)), np.full(11, control),
                      np.tile(adjoint, (11, 1)))


def test_gradient_without_control_is_penalty():
    grid = Grid(50)
    basis = ModalBasis.create(4)
    g = topological_gradient(fake_traj(4, 0.0, np.ones(4)), basis, grid, 3.0, 0.6, 0.4)
    np.testing.assert_allclose(g, 2 * 3.0 * 0.2)


def test_gradient_zero_adjoint_zero_alpha():
    grid = Grid(50)
    basis = ModalBasis.create(4)
    g = topological_gradient(fake_traj(4, 2.0, np.zeros(4)), basis, grid, 0.0, 0.6, 0.4)
    np.testing.assert_array_equal(g, 0.0)


def test_gradient_single_mode():
    grid = Grid(50)
    basis = ModalBasis.create(2)
    g = topological_gradient(fake_traj(2, 2.0, np.array([0.5, 0.0])), basis, grid, 0.0, 0, 0)
    np.testing.assert_allclose(g, 2.0 * 0.5 * np.sqrt(2) * np.sin(np.pi * grid.centers))


def test_gradient_mirror_symmetry_default_setup():
    grid = Grid(200)
    params = BeamParams()
    problem = ShapeProblem(params, grid, sin3(40, grid))
    g = problem.gradient(shape_from_intervals([(0.1, 0.9)], grid))
    assert np.max(np.abs(g - g[::-1])) / np.max(np.abs(g)) < 1e-8


def test_check_stationarity_examples():
    grid = Grid(10)
    s = shape_from_intervals([(0.0, 0.5)], grid)
    assert check_stationarity(np.zeros(10), s, 0.0)
    assert not check_stationarity(np.ones(10), s, 0.0)
    assert check_stationarity(grid.centers - 0.5, s, 0.0)


def test_levelset_step_examples():
    grid = Grid(8)
    psi = LevelSet(np.linspace(-1, 1, 8), grid)
    g = np.cos(grid.centers)
    np.testing.assert_array_equal(levelset_step(psi, g, 0.0).values, psi.values)
    np.testing.assert_allclose(levelset_step(psi, g, 1.0).values, g / gradient_norm(g, grid))
    out = levelset_step(LevelSet(-np.ones(8), grid), np.ones(8), 0.5)
    np.testing.assert_array_equal(out.values, 0.0)
    assert not shape_from_levelset(out).cells.any()
    with pytest.raises(ZeroDivisionError):
        levelset_step(psi, np.zeros(8), 0.5)


def test_gradient_norm_is_grid_weighted():
    assert gradient_norm(np.full(4, 2.0), Grid(4)) == pytest.approx(2.0)


def test_first_flip():
    grid = Grid(3)
    psi = LevelSet([-1.0, 1.0, 2.0], grid)
    d = np.array([-1.0, -1.0, 1.0])
    beta = _first_flip(psi, d)
    assert beta == pytest.approx(0.5, rel=1e-6)
    moved = shape_from_levelset(levelset_step(psi, d, beta, norm=1.0))
    np.testing.assert_array_equal(moved.cells, [True, True, False])
    assert _first_flip(psi, np.array([-1.0, 1.0, 1.0])) is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=12, max_size=12),
       st.lists(st.floats(-5, 5), min_size=12, max_size=12),
       st.lists(st.floats(0, 1), min_size=1, max_size=6))
def test_levelset_stays_bounded(psi0, g, betas):
    grid = Grid(12)
    g = np.asarray(g)
    if gradient_norm(g, grid) < 1e-6:
        return
    psi = LevelSet(psi0, grid)
    bound = max(np.max(np.abs(psi0)), np.max(np.abs(g)) / gradient_norm(g, grid))
    for beta in betas:
        psi = levelset_step(psi, g, beta)
        assert np.max(np.abs(psi.values)) <= bound * (1 + 1e-12)


@pytest.mark.parametrize("kw", [
    dict(beta0=0.0), dict(beta_min=1.0), dict(beta_shrink=1.0), dict(beta_grow=0.5),
    dict(reinit_period=0), dict(max_iters=-1), dict(alpha_schedule=()),
    dict(alpha_schedule=(1.0, 0.5)),
])
def test_optimizer_config_validation(kw):
    with pytest.raises(ValueError):
        OptimizerConfig(**kw)


def test_empty_start_rejected():
    grid = Grid(20)
    with pytest.raises(EmptyShapeError):
        optimize_shape(SMALL, OptimizerConfig(n_steps=100), LevelSet(np.ones(20), grid),
                       sin3(10, grid))


def test_stationary_start_takes_no_step():
    grid = Grid(10)
    params = replace(SMALL, volume_penalty=1.0)
    psi = LevelSet(grid.centers - 0.4, grid)  # four cells, volume 0.4 == c
    res = optimize_shape(params, OptimizerConfig(n_steps=100), psi, np.zeros(20))
    assert res.n_accepted == 0
    assert res.status == "stationary"
    assert len(res.history) == 1


def test_zero_state_drives_volume_to_target():
    grid = Grid(20)
    psi = levelset_from_intervals([(0.1, 0.9)], grid)
    cfg = OptimizerConfig(n_steps=100, alpha_schedule=(1.0, 10.0))
    res = continuation(SMALL, cfg, psi, np.zeros(20))
    assert measure(res.shape) == pytest.approx(0.4)
    assert res.history[-1].cost == pytest.approx(0.0, abs=1e-20)


@pytest.fixture(scope="module")
def small_run():
    grid = Grid(100)
    cfg = OptimizerConfig(n_steps=SMALL_STEPS, max_iters=8, alpha_schedule=(0.1,))
    psi = levelset_from_intervals([(0.1, 0.9)], grid)
    return grid, cfg, psi, optimize_shape(SMALL, cfg, psi, sin3(10, grid))


def test_accepted_costs_strictly_decrease(small_run):
    *_, res = small_run
    costs = [r.cost for r in res.history]
    assert res.n_accepted >= 1
    assert all(b < a for a, b in zip(costs, costs[1:]))
    assert [r.iter for r in res.history] == list(range(len(costs)))


def test_single_stage_continuation_matches(small_run):
    grid, cfg, psi, res = small_run
    cont = continuation(SMALL, cfg, psi, sin3(10, grid))
    assert cont.shape == res.shape
    assert [r.cost for r in cont.history] == [r.cost for r in res.history]
    np.testing.assert_array_equal(cont.levelset.values, res.levelset.values)


def test_iterates_stay_symmetric(small_run):
    grid, cfg, psi, res = small_run
    z0 = sin3(10, grid)
    for k in range(1, res.n_accepted + 1):
        shape = optimize_shape(SMALL, replace(cfg, max_iters=k), psi, z0).shape
        mismatch = np.count_nonzero(shape.cells != shape.cells[::-1])
        # a one-cell asymmetry shows up twice in the mirrored comparison
        assert mismatch <= 2


def test_problem_cache_reuses_solve():
    grid = Grid(50)
    problem = ShapeProblem(SMALL, grid, sin3(10, grid), 2000)
    s = shape_from_intervals([(0.2, 0.6)], grid)
    first = problem.solve(s)
    assert problem.solve(ActuatorShape(s.cells.copy(), grid)) is not None
    assert problem.solve(s)[1] is first[1]


def test_history_csv(tmp_path, small_run):
    *_, res = small_run
    path = tmp_path / "history.csv"
    write_history_csv(path, res.history)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(HISTORY_COLUMNS)
    assert len(lines) == len(res.history) + 1
    assert float(lines[1].split(",")[3]) == res.history[0].cost
