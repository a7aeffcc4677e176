"""Least-cost assignment of tasks to executors.

The task interval is partitioned by scanning a uniform grid for changes of
the cheapest executor and refining every change point by bisection. No
single-crossing assumption is made: if a third executor wins inside a
bracket, the bracket is split and both halves are refined.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import (
    DIGITAL,
    EconomyConfig,
    Occupation,
    _check_z,
    cost_matrix,
    executor_label,
    executor_rank,
)

DEFAULT_SCAN_POINTS = 4097
DEFAULT_TOL = 1e-10


class InfeasibleTaskError(RuntimeError):
    pass


class AllDigitalError(ValueError):
    """Hiring shares are undefined because no task is assigned to labor."""


@dataclass(frozen=True)
class Region:
    z_lo: float
    z_hi: float
    executor: object

    @property
    def length(self) -> float:
        return self.z_hi - self.z_lo


@dataclass(frozen=True)
class RegionMap:
    regions: tuple[Region, ...]
    tolerance: float

    def boundaries(self) -> list[tuple[float, object, object]]:
        """Interior breakpoints as ``(z, executor_left, executor_right)``."""
        return [(a.z_hi, a.executor, b.executor) for a, b in zip(self.regions, self.regions[1:])]

    def executor_at(self, z: float):
        for reg in self.regions:
            if z < reg.z_hi:
                return reg.executor
        return self.regions[-1].executor

    def to_rows(self) -> list[tuple[float, float, str]]:
        return [(r.z_lo, r.z_hi, executor_label(r.executor)) for r in self.regions]


@dataclass(frozen=True)
class LaborDemand:
    mass: Mapping  # executor -> task mass

    def get(self, executor) -> float:
        return self.mass.get(executor, 0.0)

    def total(self) -> float:
        return float(sum(self.mass.values()))

    @property
    def labor_mass(self) -> float:
        return float(sum(v for k, v in self.mass.items() if k != DIGITAL))


def _winners(econ: EconomyConfig, z: np.ndarray, labor_only: bool = False) -> np.ndarray:
    costs = cost_matrix(econ, z)
    if labor_only:
        costs = costs[:-1]
    idx = np.argmin(costs, axis=0)  # first minimum, i.e. lowest-ranked executor
    best = costs[idx, np.arange(z.size)]
    if np.any(~np.isfinite(best)):
        bad = z[~np.isfinite(best)][0]
        raise InfeasibleTaskError(f"every executor has infinite cost at z={bad!r}")
    return idx


def cheapest_executor(econ: EconomyConfig, z: float):
    """Lowest-cost executor at ``z``; ties go to labor, then canonical order."""
    z = np.atleast_1d(_check_z(z))
    return econ.executors[int(_winners(econ, z)[0])]


def _refine(winner, z_lo, i_lo, z_hi, i_hi, tol) -> list[tuple[float, int]]:
    """Breakpoints ``(z, new executor index)`` between two grid points."""
    while z_hi - z_lo > tol:
        mid = 0.5 * (z_lo + z_hi)
        if mid <= z_lo or mid >= z_hi:
            break
        i_mid = int(winner(np.array([mid]))[0])
        if i_mid == i_lo:
            z_lo = mid
        elif i_mid == i_hi:
            z_hi = mid
        else:
            # a third executor wins inside the bracket
            return (_refine(winner, z_lo, i_lo, mid, i_mid, tol)
                    + _refine(winner, mid, i_mid, z_hi, i_hi, tol))
    return [(0.5 * (z_lo + z_hi), i_hi)]


def _partition(winner, scan_points: int, tol: float) -> list[tuple[float, float, int]]:
    grid = np.linspace(0.0, 1.0, scan_points)
    win = winner(grid)
    starts: list[tuple[float, int]] = [(0.0, int(win[0]))]
    for c in np.flatnonzero(win[1:] != win[:-1]):
        for z, i in _refine(winner, float(grid[c]), int(win[c]), float(grid[c + 1]), int(win[c + 1]), tol):
            if i != starts[-1][1]:
                starts.append((z, i))
    ends = [z for z, _ in starts[1:]] + [1.0]
    return [(z0, z1, i) for (z0, i), z1 in zip(starts, ends)]


def compute_region_map(econ: EconomyConfig, scan_points: int = DEFAULT_SCAN_POINTS,
                       tol: float = DEFAULT_TOL) -> RegionMap:
    """Partition of [0, 1] by cheapest executor.

    Scans ``scan_points`` uniform grid points and bisects every change of
    winner down to width ``tol``.
    """
    if scan_points < 2:
        raise ValueError("scan_points must be at least 2")
    if not tol > 0:
        raise ValueError("tol must be positive")
    parts = _partition(lambda z: _winners(econ, z), scan_points, tol)
    return RegionMap(tuple(Region(z0, z1, econ.executors[i]) for z0, z1, i in parts), tol)


def labor_demand(rm: RegionMap) -> LaborDemand:
    mass: dict = {}
    for reg in rm.regions:
        mass[reg.executor] = mass.get(reg.executor, 0.0) + reg.length
    return LaborDemand(dict(sorted(mass.items(), key=lambda kv: executor_rank(kv[0]))))


def hiring_shares(ld: LaborDemand) -> dict[Occupation, float]:
    """Each occupation's fraction of total human task mass (digital excluded)."""
    labor = {k: v for k, v in ld.mass.items() if k != DIGITAL}
    total = sum(labor.values())
    if total <= 0:
        raise AllDigitalError("no task mass is assigned to labor; hiring shares are undefined")
    return {Occupation(k): v / total for k, v in sorted(labor.items(), key=lambda kv: int(kv[0])) if v > 0}


def demand_over_thetas(econ: EconomyConfig, thetas, scan_points: int = DEFAULT_SCAN_POINTS,
                       tol: float = DEFAULT_TOL, bisections: int = 60) -> np.ndarray:
    """Task mass of every executor for many theta values at once.

    Returns an array of shape ``(len(thetas), len(econ.executors))``. Labor
    costs do not depend on theta, so the labor-only partition is computed
    once; for each theta the set where digital is strictly cheaper than the
    labor envelope is located on the grid and refined by vectorized
    bisection. Agrees with :func:`compute_region_map` to within ``tol`` per
    breakpoint.
    """
    thetas = np.asarray(thetas, dtype=float).ravel()
    if np.any(thetas < 0) or np.any(~np.isfinite(thetas)):
        raise ValueError("thetas must be finite and nonnegative")
    n_occ = len(econ.occupations)
    labor_parts = _partition(lambda z: _winners(econ, z, labor_only=True), scan_points, tol)
    dc = econ.digital
    grid = np.linspace(0.0, 1.0, scan_points)
    envelope = cost_matrix(econ, grid)[:-1].min(axis=0)

    def digital_wins(z, th):
        labor = cost_matrix(econ, z)[:-1].min(axis=0)
        return dc.rental / (dc.kappa_bar + th * z**dc.gamma) < labor

    wins = dc.rental / (dc.kappa_bar + thetas[:, None] * grid[None, :] ** dc.gamma) < envelope[None, :]

    rows, cols = np.nonzero(wins[:, 1:] != wins[:, :-1])
    lo, hi = grid[cols].copy(), grid[cols + 1].copy()
    left_state = wins[rows, cols]
    th = thetas[rows]
    for _ in range(bisections):
        if lo.size == 0 or np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        same = digital_wins(mid, th) == left_state
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    cross = 0.5 * (lo + hi)

    out = np.zeros((thetas.size, n_occ + 1))
    for r in range(thetas.size):
        # digital intervals for this theta
        points = [0.0] + list(cross[rows == r]) + [1.0]
        state = bool(wins[r, 0])
        intervals = []
        for a, b in zip(points, points[1:]):
            if state:
                intervals.append((a, b))
            state = not state
        dmass = sum(b - a for a, b in intervals)
        out[r, -1] = dmass
        for z0, z1, i in labor_parts:
            overlap = sum(max(0.0, min(z1, b) - max(z0, a)) for a, b in intervals)
            out[r, i] += (z1 - z0) - overlap
    return out
