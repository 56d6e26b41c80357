"""Actuator sets on a uniform cell grid of (0, 1) and their level-set functions.

A shape is a boolean mask over cells; a level set stores one value per cell
center and induces the shape {psi < 0}.  Cells where psi == 0 are outside.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    n_cells: int = 200

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError("a grid needs at least 2 cells")

    @property
    def cell_width(self):
        return 1.0 / self.n_cells

    @property
    def edges(self):
        return np.arange(self.n_cells + 1) / self.n_cells

    @property
    def centers(self):
        return (np.arange(self.n_cells) + 0.5) / self.n_cells


@dataclass(frozen=True, eq=False)
class ActuatorShape:
    cells: np.ndarray = field(repr=False)
    grid: Grid

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool).copy()
        if cells.shape != (self.grid.n_cells,):
            raise ValueError(
                f"mask has shape {cells.shape}, grid has {self.grid.n_cells} cells")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    def __eq__(self, other):
        if not isinstance(other, ActuatorShape):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.cells, other.cells)

    def mirrored(self):
        return ActuatorShape(self.cells[::-1], self.grid)

    def intervals(self):
        """Maximal runs of cells as (left_edge, right_edge) pairs."""
        edges = self.grid.edges
        return [(edges[i], edges[j]) for i, j in _runs(self.cells)]


@dataclass(frozen=True, eq=False)
class LevelSet:
    values: np.ndarray = field(repr=False)
    grid: Grid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        if values.shape != (self.grid.n_cells,):
            raise ValueError(
                f"level set has shape {values.shape}, grid has {self.grid.n_cells} cells")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def _runs(mask):
    """Index pairs [start, stop) of maximal runs of True."""
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    d = np.diff(padded)
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def shape_from_levelset(psi):
    return ActuatorShape(psi.values < 0, psi.grid)


def measure(shape):
    return shape.grid.cell_width * int(np.count_nonzero(shape.cells))


def input_vector(shape, basis):
    """Coefficients b_n = int_omega sqrt(2) sin(n pi x) dx, exact per cell."""
    n = basis.indices[:, None] * np.pi
    edges = shape.grid.edges
    left = edges[:-1][shape.cells]
    right = edges[1:][shape.cells]
    per_cell = np.cos(n * left) - np.cos(n * right)
    return np.sqrt(2.0) * per_cell.sum(axis=1) / n[:, 0]


def _check_same_grid(s1, s2):
    if s1.grid != s2.grid:
        raise ValueError(f"grid mismatch: {s1.grid} vs {s2.grid}")


def symmetric_difference(s1, s2):
    _check_same_grid(s1, s2)
    return s1.grid.cell_width * int(np.count_nonzero(s1.cells != s2.cells))


def count_components(shape):
    return len(_runs(shape.cells))


def interface_points(psi):
    """Zero crossings of psi between adjacent centers, by linear interpolation.

    A crossing is reported wherever membership (psi < 0) changes.
    """
    x = psi.grid.centers
    v = psi.values
    inside = v < 0
    j = np.flatnonzero(inside[:-1] != inside[1:])
    denom = v[j] - v[j + 1]
    return x[j] + (x[j + 1] - x[j]) * v[j] / denom


def signed_distance_reinit(psi):
    """Replace psi by the signed distance to its interface.

    The induced shape is preserved cell by cell.  Level sets without an
    interface become the constant -1 (all inside) or +1 (all outside).
    """
    inside = psi.values < 0
    points = interface_points(psi)
    if points.size == 0:
        return LevelSet(np.where(inside, -1.0, 1.0), psi.grid)
    dist = np.min(np.abs(psi.grid.centers[:, None] - points[None, :]), axis=1)
    # keep inside cells strictly negative
    dist = np.where(inside, -np.maximum(dist, np.finfo(float).tiny), dist)
    return LevelSet(dist, psi.grid)


def levelset_from_intervals(intervals, grid):
    """Signed distance to a union of closed intervals, negative inside.

    Interval ends on the domain boundary are not interfaces.
    """
    intervals = validate_intervals(intervals)
    x = grid.centers
    inside = np.zeros(grid.n_cells, dtype=bool)
    for a, b in intervals:
        inside |= (x >= a) & (x <= b)
    ends = [e for a, b in intervals for e in (a, b) if 0.0 < e < 1.0]
    if not ends:
        return LevelSet(np.where(inside, -1.0, 1.0), grid)
    dist = np.min(np.abs(x[:, None] - np.asarray(ends)[None, :]), axis=1)
    dist = np.maximum(dist, np.finfo(float).tiny)
    return LevelSet(np.where(inside, -dist, dist), grid)


def shape_from_intervals(intervals, grid):
    return shape_from_levelset(levelset_from_intervals(intervals, grid))


def validate_intervals(intervals):
    """Check a list of (a, b) pairs: 0 <= a < b <= 1, sorted, non-overlapping."""
    out = []
    for item in intervals:
        try:
            a, b = (float(v) for v in item)
        except (TypeError, ValueError):
            raise ValueError(f"interval {item!r} is not a pair of numbers") from None
        if not (0.0 <= a < b <= 1.0):
            raise ValueError(f"interval [{a}, {b}] must satisfy 0 <= a < b <= 1")
        out.append((a, b))
    out.sort()
    for (a1, b1), (a2, b2) in zip(out, out[1:]):
        if a2 <= b1:
            raise ValueError(f"intervals [{a1}, {b1}] and [{a2}, {b2}] overlap")
    return out


def write_shape_csv(path, shape, psi=None):
    """Write ``x_center, indicator, psi`` rows for every cell."""
    if psi is None:
        psi = levelset_from_mask(shape)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_center", "indicator", "psi"])
        for x, ind, p in zip(shape.grid.centers, shape.cells, psi.values):
            w.writerow([f"{x:.17g}", int(ind), f"{p:.17g}"])


def read_shape_csv(path):
    """Inverse of :func:`write_shape_csv`; returns (shape, level set)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"x_center", "indicator", "psi"}:
        raise ValueError(f"{path}: expected columns x_center, indicator, psi")
    grid = Grid(len(rows))
    x = np.array([float(r["x_center"]) for r in rows])
    if not np.allclose(x, grid.centers, atol=1e-12):
        raise ValueError(f"{path}: x_center does not match a uniform grid")
    cells = np.array([int(r["indicator"]) for r in rows], dtype=bool)
    psi = np.array([float(r["psi"]) for r in rows])
    return ActuatorShape(cells, grid), LevelSet(psi, grid)


def levelset_from_mask(shape):
    """Signed-distance level set whose induced shape is ``shape``."""
    signs = np.where(shape.cells, -1.0, 1.0)
    return signed_distance_reinit(LevelSet(signs, shape.grid))
