"""Occupation-versus-digital cutoff tasks and their comparative statics.

The cutoff of occupation k is the task where its unit cost equals digital
capital's. It is only well defined under regularity: productivity rising in
``z`` and a single crossing of the two cost curves. :func:`solve_cutoff`
checks both on a grid before bisecting, and raises a specific error when
either fails, so callers can fall back to the general region map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .assignment import AllDigitalError, compute_region_map, hiring_shares, labor_demand
from .model import (
    DigitalCapitalSpec,
    EconomyConfig,
    Mode,
    Occupation,
    OccupationSpec,
    digital_unit_cost,
    effective_productivity,
    labor_unit_cost,
    productivity_slope,
)

REGULARITY_POINTS = 1001
ROOT_XTOL = 1e-12
MAX_BISECTIONS = 200
PROP1_THETAS = np.linspace(0.5, 8.0, 20)


class CutoffError(ValueError):
    pass


class NoCrossing(CutoffError):
    """One executor is cheaper on the whole task interval."""


class MultipleCrossings(CutoffError):
    """The cost curves cross more than once; use the region map instead."""


class RegularityViolated(CutoffError):
    """Effective productivity is not increasing in task complexity."""


class DegenerateDenominator(ArithmeticError):
    pass


@dataclass(frozen=True)
class CutoffResult:
    occupation: Occupation
    z_star: float
    theta: float
    converged: bool
    iterations: int
    boundary: bool = False
    # True when labor is cheaper below the cutoff and digital above it
    digital_above: bool = True


def _gap_args(occ: OccupationSpec, dc: DigitalCapitalSpec, mode: Mode):
    return (occ.lambda_m, occ.lambda_r, occ.lambda_a, occ.wage, Mode(mode) is Mode.NORMALIZED,
            dc.kappa_bar, dc.theta, dc.gamma, dc.rental)


def is_regular(occ: OccupationSpec, mode: Mode = Mode.RAW, strict: bool = True,
               points: int = REGULARITY_POINTS) -> bool:
    lam = effective_productivity(occ, np.linspace(0.0, 1.0, points), mode)
    steps = np.diff(lam)
    if strict:
        return bool(np.all(steps > 0))
    return bool(np.all(steps >= -1e-12 * max(1.0, float(np.max(np.abs(lam))))))


def solve_cutoff(occ: OccupationSpec, dc: DigitalCapitalSpec, mode: Mode = Mode.RAW, *,
                 strict: bool = True, points: int = REGULARITY_POINTS,
                 xtol: float = ROOT_XTOL) -> CutoffResult:
    """Root of ``c_k(z) - c_D(z; theta)`` under the single-crossing conditions.

    With ``strict=False`` productivity need only be non-decreasing, which
    admits constant-productivity occupations.
    """
    if not is_regular(occ, mode, strict, points):
        raise RegularityViolated(f"{occ.kind.label}: productivity is not increasing on [0, 1]")
    grid = np.linspace(0.0, 1.0, points)
    gap = labor_unit_cost(occ, grid, mode) - digital_unit_cost(dc, grid)
    sign = np.sign(gap)
    nz = np.flatnonzero(sign != 0)
    if nz.size == 0:
        raise NoCrossing(f"{occ.kind.label}: cost curves coincide on the whole grid")
    flips = np.flatnonzero(sign[nz[1:]] != sign[nz[:-1]])
    if flips.size > 1:
        raise MultipleCrossings(f"{occ.kind.label}: cost gap changes sign {flips.size} times")
    if flips.size == 0:
        # a crossing can still sit exactly on an end point
        for end in (0, points - 1):
            if sign[end] == 0:
                return CutoffResult(occ.kind, float(grid[end]), dc.theta, True, 0, boundary=True,
                                    digital_above=bool(sign[nz[0]] < 0))
        raise NoCrossing(f"{occ.kind.label}: one executor is cheaper on the whole task interval")

    a, b = nz[flips[0]], nz[flips[0] + 1]
    root, iters, converged = kernels.bisect_cost_gap(
        float(grid[a]), float(grid[b]), *_gap_args(occ, dc, mode), xtol, MAX_BISECTIONS)
    boundary = root <= xtol or root >= 1.0 - xtol
    return CutoffResult(occ.kind, float(root), dc.theta, bool(converged), int(iters),
                        boundary=bool(boundary), digital_above=bool(sign[a] < 0))


def cutoff_derivative(occ: OccupationSpec, dc: DigitalCapitalSpec, z_star: float,
                      mode: Mode = Mode.RAW) -> float:
    """Slope of the cutoff in theta by the implicit function theorem.

    With ``F(z, theta) = w/lambda(z) - c_D(z; theta) = 0``,
    ``dz*/dtheta = -F_theta / F_z = (dc_D/dtheta) / (d(w/lambda)/dz - dc_D/dz)``.
    """
    if not 0.0 < z_star < 1.0:
        raise ValueError("cutoff derivative needs an interior root")
    r, kbar, theta, gamma = dc.rental, dc.kappa_bar, dc.theta, dc.gamma
    kappa = kbar + theta * z_star**gamma
    dcd_dtheta = -r * z_star**gamma / kappa**2
    dcd_dz = -r * theta * gamma * z_star ** (gamma - 1.0) / kappa**2
    lam = effective_productivity(occ, z_star, mode)
    dlabor_dz = -occ.wage * productivity_slope(occ, z_star, mode) / lam**2
    denom = dlabor_dz - dcd_dz
    if abs(denom) < 1e-14:
        raise DegenerateDenominator(f"|F_z| = {abs(denom):.3g} at z*={z_star}")
    return dcd_dtheta / denom


# --- theta sweeps -----------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    theta: float
    cutoffs: dict  # Occupation -> float or None
    mass: dict  # executor -> float, every executor present
    shares: dict  # Occupation -> float; empty when all tasks are digital


@dataclass(frozen=True)
class SweepTable:
    kinds: tuple[Occupation, ...]
    rows: tuple[SweepRow, ...]


def sweep_theta(econ: EconomyConfig, thetas: Sequence[float], *, strict: bool = False,
                scan_points: int = 4097, tol: float = 1e-10) -> SweepTable:
    thetas = [float(t) for t in thetas]
    if not thetas:
        raise ValueError("theta list is empty")
    if any(b <= a for a, b in zip(thetas, thetas[1:])):
        raise ValueError("theta list must be strictly increasing")
    rows = []
    for theta in thetas:
        e = econ.with_theta(theta)
        ld = labor_demand(compute_region_map(e, scan_points, tol))
        try:
            shares = hiring_shares(ld)
        except AllDigitalError:
            shares = {}
        cutoffs = {}
        for occ in e.occupations:
            try:
                cutoffs[occ.kind] = solve_cutoff(occ, e.digital, e.composition_mode, strict=strict).z_star
            except CutoffError:
                cutoffs[occ.kind] = None
        mass = {ex: ld.get(ex) for ex in e.executors}
        rows.append(SweepRow(theta, cutoffs, mass, {k: shares.get(k, 0.0) for k in e.kinds} if shares else {}))
    return SweepTable(econ.kinds, tuple(rows))


# --- numerical check of the monotone cutoff claim --------------------------

@dataclass
class DrawRecord:
    index: int
    occupation: OccupationSpec
    digital: DigitalCapitalSpec
    kept: bool
    reason: str = ""
    monotone: bool = False
    derivative_ok: bool = False
    max_rel_error: float = math.nan
    cutoffs: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.kept and self.monotone and self.derivative_ok


@dataclass
class Prop1Report:
    """Outcome of a verification run.

    ``records`` holds kept draws only; rejected draws are tallied by reason
    in ``rejected``.
    """

    seed: int
    draws: int
    records: list[DrawRecord]
    rejected: dict[str, int]

    @property
    def kept(self) -> int:
        return len(self.records)

    @property
    def passed(self) -> int:
        return sum(r.passed for r in self.records)

    @property
    def ok(self) -> bool:
        return self.passed == self.kept

    def max_rel_error(self) -> float:
        return max((r.max_rel_error for r in self.records), default=0.0)


def _draw_block(rng: np.random.Generator, size: int) -> np.ndarray:
    """Columns: lambda_m, lambda_r, lambda_a, wage, rental, kappa_bar, gamma.

    Capabilities U[0,2], wage U[0.5,2], rental U[0.5,2], kappa_bar U[0.1,1],
    gamma U(1,3].
    """
    block = np.empty((size, 7))
    block[:, 0:3] = rng.uniform(0.0, 2.0, size=(size, 3))
    block[:, 3] = rng.uniform(0.5, 2.0, size=size)
    block[:, 4] = rng.uniform(0.5, 2.0, size=size)
    block[:, 5] = rng.uniform(0.1, 1.0, size=size)
    block[:, 6] = 3.0 - 2.0 * rng.random(size)
    return block


def _prescreen(block: np.ndarray, theta_min: float, mode: Mode) -> np.ndarray:
    """Necessary conditions for a draw to be kept, for a whole block at once.

    Productivity strictly increasing on the regularity grid, labor no dearer
    than digital at ``z = 0`` and no cheaper at ``z = 1`` for the smallest
    theta (the ``z = 1`` gap only grows with theta).
    """
    lm, lr, la, w, r, kbar = (block[:, i:i + 1] for i in range(6))
    z = np.linspace(0.0, 1.0, REGULARITY_POINTS)
    m, rt = 1.0 - z, 4.0 * z * (1.0 - z)
    lam = lm * m + lr * rt + la * z
    if Mode(mode) is Mode.NORMALIZED:
        lam = lam / (m + rt + z)
    regular = np.all(np.diff(lam, axis=1) > 0, axis=1)
    with np.errstate(divide="ignore"):
        low = np.where(lam[:, 0] > 0, w[:, 0] / np.where(lam[:, 0] > 0, lam[:, 0], 1.0), np.inf) <= r[:, 0] / kbar[:, 0]
    high = w[:, 0] / lam[:, -1] >= r[:, 0] / (kbar[:, 0] + theta_min)
    return regular & low & high


def check_draw(index: int, occ: OccupationSpec, dc: DigitalCapitalSpec,
               thetas: Sequence[float] = PROP1_THETAS, mode: Mode = Mode.RAW,
               fd_step: float = 1e-5, rel_tol: float = 1e-4) -> DrawRecord:
    rec = DrawRecord(index, occ, dc, kept=False)
    if not is_regular(occ, mode, strict=True):
        rec.reason = "productivity not increasing"
        return rec
    results = []
    for theta in thetas:
        try:
            res = solve_cutoff(occ, dc.with_theta(theta), mode)
        except CutoffError as exc:
            rec.reason = f"theta={theta:.6g}: {type(exc).__name__}"
            return rec
        if res.boundary:
            rec.reason = f"theta={theta:.6g}: boundary root"
            return rec
        if not res.digital_above:
            rec.reason = f"theta={theta:.6g}: digital cheaper below the crossing"
            return rec
        results.append(res)
    rec.kept = True
    rec.cutoffs = [r.z_star for r in results]
    rec.monotone = all(b < a for a, b in zip(rec.cutoffs, rec.cutoffs[1:]))

    worst = 0.0
    agree = True
    for theta, res in zip(thetas, results):
        h = fd_step * theta
        try:
            up = solve_cutoff(occ, dc.with_theta(theta + h), mode).z_star
            down = solve_cutoff(occ, dc.with_theta(theta - h), mode).z_star
            analytic = cutoff_derivative(occ, dc.with_theta(theta), res.z_star, mode)
        except (CutoffError, DegenerateDenominator) as exc:
            rec.reason = f"derivative check failed at theta={theta:.6g}: {type(exc).__name__}"
            agree = False
            break
        fd = (up - down) / (2.0 * h)
        err = abs(analytic - fd) / max(abs(fd), 1e-300)
        worst = max(worst, err)
        if err > rel_tol or (analytic < 0) != (fd < 0):
            agree = False
    rec.derivative_ok = agree
    rec.max_rel_error = worst
    if not rec.monotone:
        rec.reason = "cutoff not strictly decreasing"
    elif not agree and not rec.reason:
        rec.reason = "derivative disagrees with finite difference"
    return rec


def verify_proposition1(draw_count: int, seed: int, thetas: Sequence[float] = PROP1_THETAS,
                        mode: Mode = Mode.RAW, *, until_kept: bool = False,
                        block_size: int = 4096, max_draws: int = 50_000_000) -> Prop1Report:
    """Check that regular instances have a cutoff strictly decreasing in theta.

    Draws random single-occupation instances and keeps those that are
    regular with a single crossing (digital cheaper above it) at every
    theta. Each kept draw is checked for strict monotonicity along
    ``thetas`` and for agreement of :func:`cutoff_derivative` with a central
    finite difference.

    By default ``draw_count`` instances are drawn. With ``until_kept=True``
    drawing continues until ``draw_count`` instances have been kept.
    """
    if draw_count < 0:
        raise ValueError("draw_count must be nonnegative")
    thetas = [float(t) for t in thetas]
    rng = np.random.default_rng(seed)
    records: list[DrawRecord] = []
    rejected: dict[str, int] = {}
    drawn = 0

    def done():
        return len(records) >= draw_count if until_kept else drawn >= draw_count

    while not done():
        if drawn >= max_draws:
            raise RuntimeError(f"kept only {len(records)} of {draw_count} instances in {drawn} draws")
        size = block_size if until_kept else min(block_size, draw_count - drawn)
        block = _draw_block(rng, size)
        candidates = _prescreen(block, min(thetas), mode)
        for j in range(size):
            if done():
                break
            index = drawn
            drawn += 1
            if not candidates[j]:
                rejected["prescreen"] = rejected.get("prescreen", 0) + 1
                continue
            lm, lr, la, w, r, kbar, gamma = (float(v) for v in block[j])
            occ = OccupationSpec(Occupation.PROF, lm, lr, la, w)
            dc = DigitalCapitalSpec(kbar, thetas[0], gamma, r)
            rec = check_draw(index, occ, dc, thetas, mode)
            if rec.kept:
                records.append(rec)
            else:
                key = rec.reason.split(": ")[-1]
                rejected[key] = rejected.get(key, 0) + 1
    return Prop1Report(seed, drawn, records, dict(sorted(rejected.items())))
