"""Grid dynamic programming for the one-dimensional inventory problem.

The cost-to-go functions are tabulated on ``N`` equally spaced inventory
levels and linearly interpolated in between.  Each backward step minimises
a convex piecewise-linear function of the order-up-to level, which is done
exactly by scanning its breakpoints.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .instances import InventoryParams


@dataclass
class ValueTable:
    grid: np.ndarray
    values: np.ndarray          # values[t] tabulates Q_t, t = 1..T+1; row 0 unused
    q1: float                   # Q_1 at the initial inventory level
    y1: float
    extrapolations: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def T(self) -> int:
        return self.values.shape[0] - 2

    @property
    def N(self) -> int:
        return self.grid.size

    def outside(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return (y < self.grid[0]) | (y > self.grid[-1])

    def write_csv(self, path, stages=None) -> None:
        stages = range(1, self.T + 2) if stages is None else stages
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["t", "y", "value"])
            for t in stages:
                for y, v in zip(self.grid, self.values[t]):
                    w.writerow([t, repr(float(y)), repr(float(v))])


def _interp(grid, vals, y):
    """Piecewise-linear interpolation, extended by the end-segment slopes."""
    y = np.asarray(y, dtype=float)
    out = np.interp(y, grid, vals)
    lo, hi = y < grid[0], y > grid[-1]
    if lo.any():
        s = (vals[1] - vals[0]) / (grid[1] - grid[0])
        out[lo] = vals[0] + s * (y[lo] - grid[0])
    if hi.any():
        s = (vals[-1] - vals[-2]) / (grid[-1] - grid[-2])
        out[hi] = vals[-1] + s * (y[hi] - grid[-1])
    return out


def interp(table: ValueTable, t: int, y):
    """Interpolated Q_t at ``y`` (scalar or array); see ``ValueTable.outside``."""
    if not 1 <= t <= table.T + 1:
        raise ValueError(f"t must be in 1..{table.T + 1}")
    scalar = np.ndim(y) == 0
    v = _interp(table.grid, table.values[t], np.atleast_1d(y))
    return float(v[0]) if scalar else v


def grid_dp(params: InventoryParams, N: int = 2001, lo: float = -100.0, hi: float = 2000.0) -> ValueTable:
    """Backward recursion on an ``N``-point grid over ``[lo, hi]``."""
    if N < 2 or not lo < hi:
        raise ValueError("need N >= 2 and lo < hi")
    T = params.T
    grid = np.linspace(lo, hi, N)
    values = np.full((T + 2, N), np.nan)
    values[T + 1] = 0.0
    flags = []
    q1 = np.nan
    for t in range(T, 0, -1):
        c, D = params.order_cost(t), params.demand(t)
        b, h = params.backorder, params.holding
        nxt = values[t + 1]

        def total(x):
            # cost of ordering up to x, excluding the -c*y term
            return c * x + b * np.maximum(D - x, 0.0) + h * np.maximum(x - D, 0.0) + _interp(grid, nxt, x - D)

        cand = np.append(grid + D, D)
        g = total(cand)
        j = int(np.argmin(g))
        x_star = cand[j]
        right_slope = c + h + (nxt[-1] - nxt[-2]) / (grid[-1] - grid[-2])
        if right_slope < 0:
            raise ValueError(f"stage {t}: ordering more is always cheaper; grid too narrow")
        x_opt = np.maximum(grid, x_star)
        values[t] = -c * grid + total(x_opt)
        n_out = int(((x_opt - D < lo) | (x_opt - D > hi)).sum())
        if t == 1:
            x1 = max(params.y1, x_star)
            q1 = float(-c * params.y1 + total(np.array([x1]))[0])
            n_out += int(x1 - D < lo or x1 - D > hi)
        if n_out:
            flags.append((t, n_out))
    return ValueTable(grid, values, q1, params.y1, flags)


def refinement_tolerance(params: InventoryParams, N: int = 2001, lo: float = -100.0, hi: float = 2000.0):
    """``(table, tol_interp)`` with ``tol_interp = |Q_1^(N) - Q_1^(2N-1)|``.

    The finer grid nests the coarse one, so the difference isolates the
    interpolation error rather than a shift of grid points.
    """
    coarse = grid_dp(params, N, lo, hi)
    fine = grid_dp(params, 2 * N - 1, lo, hi)
    return coarse, abs(fine.q1 - coarse.q1)
