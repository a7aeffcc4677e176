"""Task continuum primitives: skill composition, capabilities and unit costs.

Tasks live on ``z in [0, 1]``. Each task mixes manual, routine and abstract
content; an occupation's productivity on a task is the dot product of its
capability vector with that mix, and its unit cost is wage over
productivity. Digital capital has productivity ``kappa_bar + theta * z**gamma``
and unit cost ``rental / productivity``.

All cost and productivity functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of a model function."""


class ConfigError(ValueError):
    """A model or run configuration is invalid."""


class Mode(str, enum.Enum):
    RAW = "raw"
    NORMALIZED = "normalized"


class Occupation(enum.IntEnum):
    """The five occupation types in canonical (tie-breaking) order."""

    PHYS = 0
    AUX = 1
    TECH = 2
    PROF = 3
    MGMT = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Occupation":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise ConfigError(f"unknown occupation kind {label!r}") from None


# Digital capital as an executor; ranks after every occupation. An executor
# is either an Occupation member or this sentinel.
DIGITAL = "digital"


def executor_rank(executor) -> int:
    return len(Occupation) if executor == DIGITAL else int(executor)


def executor_label(executor) -> str:
    return DIGITAL if executor == DIGITAL else Occupation(executor).label


def parse_executor(label: str):
    if label.strip().lower() == DIGITAL:
        return DIGITAL
    return Occupation.from_label(label)


@dataclass(frozen=True)
class SkillComposition:
    manual: float
    routine: float
    abstract: float
    mode: Mode = Mode.RAW

    @property
    def total(self) -> float:
        return self.manual + self.routine + self.abstract


@dataclass(frozen=True)
class OccupationSpec:
    kind: Occupation
    lambda_m: float
    lambda_r: float
    lambda_a: float
    wage: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Occupation(self.kind))
        caps = (self.lambda_m, self.lambda_r, self.lambda_a)
        if any(not np.isfinite(c) or c < 0 for c in caps):
            raise ConfigError(f"{self.kind.label}: capabilities must be finite and nonnegative")
        if sum(caps) <= 0:
            raise ConfigError(f"{self.kind.label}: capability vector is all zero")
        if not (np.isfinite(self.wage) and self.wage > 0):
            raise ConfigError(f"{self.kind.label}: wage must be positive")

    @property
    def capabilities(self) -> tuple[float, float, float]:
        return (self.lambda_m, self.lambda_r, self.lambda_a)


@dataclass(frozen=True)
class DigitalCapitalSpec:
    kappa_bar: float
    theta: float
    gamma: float
    rental: float

    def __post_init__(self):
        if not (np.isfinite(self.kappa_bar) and self.kappa_bar > 0):
            raise ConfigError("digital.kappa_bar must be positive")
        if not (np.isfinite(self.theta) and self.theta >= 0):
            raise ConfigError("digital.theta must be nonnegative")
        if not (np.isfinite(self.gamma) and self.gamma > 1):
            raise ConfigError("digital.gamma must exceed 1")
        if not (np.isfinite(self.rental) and self.rental > 0):
            raise ConfigError("digital.rental must be positive")

    def with_theta(self, theta: float) -> "DigitalCapitalSpec":
        return replace(self, theta=float(theta))


@dataclass(frozen=True)
class EconomyConfig:
    occupations: tuple[OccupationSpec, ...]
    digital: DigitalCapitalSpec
    composition_mode: Mode = Mode.RAW
    # occupations sorted into canonical order on construction
    kinds: tuple[Occupation, ...] = field(init=False, repr=False)

    def __post_init__(self):
        occs = tuple(sorted(self.occupations, key=lambda o: o.kind))
        if not occs:
            raise ConfigError("economy needs at least one occupation")
        kinds = tuple(o.kind for o in occs)
        if len(set(kinds)) != len(kinds):
            raise ConfigError("duplicate occupation kinds in economy")
        object.__setattr__(self, "occupations", occs)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "composition_mode", Mode(self.composition_mode))

    def with_theta(self, theta: float) -> "EconomyConfig":
        return EconomyConfig(self.occupations, self.digital.with_theta(theta), self.composition_mode)

    def occupation(self, kind: Occupation) -> OccupationSpec:
        for occ in self.occupations:
            if occ.kind == kind:
                return occ
        raise KeyError(kind)

    @property
    def executors(self) -> tuple:
        return self.kinds + (DIGITAL,)


def _check_z(z):
    arr = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"task index must lie in [0, 1], got {z!r}")
    return arr


def _raw_components(z):
    return 1.0 - z, 4.0 * z * (1.0 - z), z


def skill_composition(z: float, mode: Mode = Mode.RAW) -> SkillComposition:
    """Manual/routine/abstract intensity of task ``z``.

    Raw mode uses ``(1 - z, 4z(1 - z), z)`` verbatim, which sums to
    ``1 + 4z(1 - z)`` rather than 1. Normalized mode divides by that sum.
    """
    z = float(_check_z(z))
    m, r, a = _raw_components(z)
    mode = Mode(mode)
    if mode is Mode.NORMALIZED:
        s = m + r + a
        m, r, a = m / s, r / s, a / s
    return SkillComposition(m, r, a, mode)


def effective_productivity(occ: OccupationSpec, z, mode: Mode = Mode.RAW):
    z = _check_z(z)
    m, r, a = _raw_components(z)
    lam = occ.lambda_m * m + occ.lambda_r * r + occ.lambda_a * a
    if Mode(mode) is Mode.NORMALIZED:
        lam = lam / (m + r + a)
    return lam if lam.ndim else float(lam)


def productivity_slope(occ: OccupationSpec, z, mode: Mode = Mode.RAW):
    """Analytic derivative of :func:`effective_productivity` in ``z``."""
    z = _check_z(z)
    m, r, a = _raw_components(z)
    raw = occ.lambda_m * m + occ.lambda_r * r + occ.lambda_a * a
    d_raw = -occ.lambda_m + occ.lambda_r * (4.0 - 8.0 * z) + occ.lambda_a
    if Mode(mode) is Mode.NORMALIZED:
        s = m + r + a
        ds = 4.0 - 8.0 * z
        d_raw = (d_raw * s - raw * ds) / (s * s)
    return d_raw if np.ndim(d_raw) else float(d_raw)


def labor_unit_cost(occ: OccupationSpec, z, mode: Mode = Mode.RAW):
    """Wage over productivity; ``inf`` where the occupation has zero productivity."""
    lam = np.asarray(effective_productivity(occ, z, mode), dtype=float)
    with np.errstate(divide="ignore"):
        cost = np.where(lam > 0, occ.wage / np.where(lam > 0, lam, 1.0), np.inf)
    return cost if cost.ndim else float(cost)


def digital_productivity(dc: DigitalCapitalSpec, z):
    z = _check_z(z)
    kappa = dc.kappa_bar + dc.theta * z**dc.gamma
    return kappa if kappa.ndim else float(kappa)


def digital_unit_cost(dc: DigitalCapitalSpec, z):
    return dc.rental / digital_productivity(dc, z)


def cost_matrix(econ: EconomyConfig, z: Sequence[float] | np.ndarray) -> np.ndarray:
    """Unit costs of every executor on the grid ``z``.

    Rows follow ``econ.executors`` (occupations in canonical order, digital
    last), so a first-index ``argmin`` down the rows applies the tie-break.
    """
    z = np.atleast_1d(_check_z(z))
    rows = [np.broadcast_to(labor_unit_cost(o, z, econ.composition_mode), z.shape) for o in econ.occupations]
    rows.append(np.broadcast_to(digital_unit_cost(econ.digital, z), z.shape))
    return np.vstack(rows)
